/** Minimal markdown renderer for chat messages.
 *
 * Model output is untrusted, so every character is HTML-escaped first and
 * only markup generated here is ever injected. Supported syntax: fenced and
 * inline code, **bold**, *italic*, and line breaks.
 */

function escapeHtml(text: string): string {
  return text
    .replace(/&/g, "&amp;")
    .replace(/</g, "&lt;")
    .replace(/>/g, "&gt;")
    .replace(/"/g, "&quot;")
    .replace(/'/g, "&#39;");
}

function inline(escaped: string): string {
  return escaped
    .replace(/`([^`]+)`/g, "<code>$1</code>")
    .replace(/\*\*([^*]+)\*\*/g, "<strong>$1</strong>")
    .replace(/\*([^*]+)\*/g, "<em>$1</em>")
    .replace(/\n/g, "<br>");
}

export function renderMarkdown(text: string): string {
  const escaped = escapeHtml(text);
  const parts = escaped.split(/```[^\n]*\n?/);
  // odd-indexed parts are fenced code blocks
  return parts
    .map((part, i) =>
      i % 2 === 1 ? `<pre><code>${part}</code></pre>` : inline(part),
    )
    .join("");
}
