/** Click-drag highlight editing over the reference text.
 *
 * The reference is rendered as plain text nodes (optionally split by <mark>
 * elements for existing spans); a DOM Range over those nodes converts back to
 * character offsets into the original string, which are exactly what the
 * service validates.
 */

import type { Span } from "./types.js";

/** Character offset of (node, offsetInNode) relative to root's full text. */
function charOffset(root: Node, node: Node, offset: number): number {
  const walker = document.createTreeWalker(root, NodeFilter.SHOW_TEXT);
  let total = 0;
  let current = walker.nextNode();
  while (current) {
    if (current === node) {
      return total + offset;
    }
    total += (current.textContent ?? "").length;
    current = walker.nextNode();
  }
  // node is an element (e.g. triple-click selects the container itself)
  return offset === 0 ? 0 : total;
}

/** Convert a DOM Range inside the reference container to a character span. */
export function spanFromRange(root: HTMLElement, range: Range): Span | null {
  const start = charOffset(root, range.startContainer, range.startOffset);
  const end = charOffset(root, range.endContainer, range.endOffset);
  if (end <= start) return null;
  return { start, end };
}

/** Union of overlapping or touching spans, sorted by start (mirrors the
 * service's merge rule so the preview matches what gets submitted). */
export function mergeSpans(spans: Span[]): Span[] {
  if (spans.length === 0) return [];
  const ordered = [...spans].sort((a, b) => a.start - b.start || a.end - b.end);
  const merged = [ordered[0]];
  for (const span of ordered.slice(1)) {
    const last = merged[merged.length - 1];
    if (span.start <= last.end) {
      merged[merged.length - 1] = { start: last.start, end: Math.max(last.end, span.end) };
    } else {
      merged.push({ ...span });
    }
  }
  return merged;
}

/** Render the reference text with <mark> elements over the current spans. */
export function renderHighlights(root: HTMLElement, text: string, spans: Span[]): void {
  root.textContent = "";
  let cursor = 0;
  for (const span of mergeSpans(spans)) {
    if (span.start > cursor) {
      root.appendChild(document.createTextNode(text.slice(cursor, span.start)));
    }
    const mark = document.createElement("mark");
    mark.textContent = text.slice(span.start, span.end);
    root.appendChild(mark);
    cursor = span.end;
  }
  if (cursor < text.length) {
    root.appendChild(document.createTextNode(text.slice(cursor)));
  }
}

export interface HighlightEditor {
  root: HTMLElement;
  submitButton: HTMLButtonElement;
  getSpans(): Span[];
  addFromSelection(): Span | null;
  clear(): void;
}

/** Wire a container + submit button into a highlight editor.
 *
 * The submit button stays disabled until at least one span exists; mouseup
 * turns the current selection into a span.
 */
export function createHighlightEditor(
  root: HTMLElement,
  submitButton: HTMLButtonElement,
  text: string,
): HighlightEditor {
  let spans: Span[] = [];

  function refresh(): void {
    renderHighlights(root, text, spans);
    submitButton.disabled = spans.length === 0;
  }

  function addFromSelection(): Span | null {
    const selection = window.getSelection();
    if (!selection || selection.rangeCount === 0 || selection.isCollapsed) return null;
    const range = selection.getRangeAt(0);
    if (!root.contains(range.commonAncestorContainer)) return null;
    const span = spanFromRange(root, range);
    if (span) {
      spans = mergeSpans([...spans, span]);
      refresh();
    }
    return span;
  }

  root.addEventListener("mouseup", () => addFromSelection());
  refresh();
  return {
    root,
    submitButton,
    getSpans: () => spans.map((s) => ({ ...s })),
    addFromSelection,
    clear: () => {
      spans = [];
      refresh();
    },
  };
}
