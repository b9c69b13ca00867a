"""Conversational prompt refinement: a three-actor chat workflow that turns
unlabeled user data plus human feedback into zero-shot and few-shot prompts.
"""

from .backends import BackendConfig, ChatRequest, Completion, complete, scripted
from .chatstore import Author, Message, Transcript
from .ingest import UserData, load_user_data
from .orchestrator import (
    Session,
    Stage,
    StageKind,
    dispatch,
    finalize,
    post_user_message,
    start_session,
)
from .promptkit import (
    AcceptedExample,
    GENERIC_TEMPLATE,
    Instruction,
    PromptBundle,
    TargetTemplate,
    TARGET_TEMPLATES,
    build_fs_prompt,
    build_zs_prompt,
)
from .protocol import (
    ApiCall,
    ApiFunction,
    ParseDiagnostic,
    parse_model_response,
    render_api_call,
)
from .templates import TemplateId, TemplateLibrary, render

__version__ = "0.1.0"
