/** Editor state machine: triggers, suggestion application, undo, staleness.
 *
 * The document only ever changes through user edits (setText), apply(),
 * undo() or redo(); every change bumps a revision counter. Suggestions
 * remember the revision they were fetched at and refuse to apply onto a
 * document that has moved on.
 */

import { ServiceClient } from "./api.js";
import type { Candidate, EditOp, SuggestRequest } from "./types.js";
import { UndoStack } from "./undo.js";

export type FunctionTab = "complete" | "polish" | "correct" | "infill";

export interface Selection {
  start: number;
  end: number;
}

export interface EditorState {
  text: string;
  caret: number;
  selection: Selection | null;
  activeTab: FunctionTab;
  suggestions: Candidate[];
  selectedIndex: number;
  revision: number;
  fetchedAtRevision: number | null;
  banner: string | null;
}

interface PendingRequest {
  tab: FunctionTab;
  id: number;
}

/** Token span (start index, length) covering a character selection. */
export function tokenSpanFor(text: string, selection: Selection): [number, number] {
  const tokens = text.split(/\s+/).filter((t) => t.length > 0);
  let cursor = 0;
  let first = -1;
  let last = -1;
  for (let i = 0; i < tokens.length; i++) {
    const start = text.indexOf(tokens[i], cursor);
    const end = start + tokens[i].length;
    cursor = end;
    if (end > selection.start && start < selection.end) {
      if (first < 0) first = i;
      last = i;
    }
  }
  if (first < 0) return [0, 0];
  return [first, last - first + 1];
}

/** Apply service token edits; positions refer to the original tokens. */
export function applyEdits(tokens: string[], edits: EditOp[]): string[] {
  const out = [...tokens];
  const ordered = [...edits].sort((a, b) => b.pos - a.pos);
  for (const edit of ordered) {
    if (edit.kind === "substitute") {
      out[edit.pos] = edit.new ?? out[edit.pos];
    } else if (edit.kind === "delete") {
      out.splice(edit.pos, 1);
    } else {
      out.splice(edit.pos, 0, edit.new ?? "");
    }
  }
  return out;
}

export class EditorController {
  state: EditorState;
  private undoStack: UndoStack;
  private nextRequestId = 1;
  private pending: Map<FunctionTab, PendingRequest> = new Map();

  constructor(private client: ServiceClient, initialText = "") {
    this.state = {
      text: initialText,
      caret: initialText.length,
      selection: null,
      activeTab: "complete",
      suggestions: [],
      selectedIndex: 0,
      revision: 0,
      fetchedAtRevision: null,
      banner: null,
    };
    this.undoStack = new UndoStack({ text: initialText, caret: initialText.length });
  }

  /** User edit: snapshots for undo and advances the revision. */
  setText(text: string, caret?: number): void {
    this.undoStack.push({ text, caret: caret ?? text.length });
    this.state.text = text;
    this.state.caret = Math.min(caret ?? text.length, text.length);
    this.state.revision += 1;
    this.state.banner = null;
  }

  setCaret(caret: number): void {
    this.state.caret = Math.max(0, Math.min(caret, this.state.text.length));
  }

  setSelection(selection: Selection | null): void {
    this.state.selection = selection;
  }

  private buildRequest(tab: FunctionTab, keywords?: string[]): SuggestRequest | null {
    const { text, caret, selection } = this.state;
    if (tab === "complete") {
      const prefix = text.slice(0, caret).trim();
      if (!prefix) return null;
      return { kind: "complete", text: prefix, n: 3 };
    }
    if (tab === "polish") {
      if (!selection || selection.end <= selection.start) return null;
      const span = tokenSpanFor(text, selection);
      if (span[1] === 0) return null;
      return { kind: "polish", text, span, n: 5 };
    }
    if (tab === "correct") {
      if (!text.trim()) return null;
      return { kind: "correct", text };
    }
    if (!keywords || keywords.length === 0) return null;
    return { kind: "infill", keywords, n: 3 };
  }

  /**
   * Fire a suggestion request for a function tab. Responses landing after
   * a newer trigger for the same tab, or after any document change, are
   * dropped silently.
   */
  async trigger(tab: FunctionTab, keywords?: string[]): Promise<void> {
    const request = this.buildRequest(tab, keywords);
    if (request === null) return;
    const id = this.nextRequestId++;
    const revisionAtSend = this.state.revision;
    this.pending.set(tab, { tab, id });
    this.state.activeTab = tab;
    try {
      const response = await this.client.suggest(request);
      const current = this.pending.get(tab);
      if (!current || current.id !== id) return; // superseded
      this.pending.delete(tab);
      if (this.state.revision !== revisionAtSend) return; // stale
      this.state.suggestions = response.candidates;
      this.state.selectedIndex = 0;
      this.state.fetchedAtRevision = revisionAtSend;
      this.state.banner = null;
    } catch (error) {
      const current = this.pending.get(tab);
      if (current && current.id === id) {
        this.pending.delete(tab);
        this.state.banner = `service error: ${(error as Error).message}`;
      }
    }
  }

  get hasInFlight(): boolean {
    return this.pending.size > 0;
  }

  /**
   * Apply one suggestion as a single undoable document transition.
   * Returns false (with a banner) when the suggestions are stale.
   */
  apply(index: number): boolean {
    const { suggestions, fetchedAtRevision, revision, activeTab } = this.state;
    if (suggestions.length === 0 || index < 0 || index >= suggestions.length) {
      return false;
    }
    if (fetchedAtRevision !== revision) {
      this.state.banner = "suggestions are stale; trigger again";
      return false;
    }
    const candidate = suggestions[index];
    let nextText: string;
    let nextCaret: number;
    if (activeTab === "polish") {
      const selection = this.state.selection!;
      const before = this.state.text.slice(0, selection.start);
      const after = this.state.text.slice(selection.end);
      nextText = before + candidate.text + after;
      nextCaret = selection.start + candidate.text.length;
    } else if (activeTab === "correct") {
      const tokens = this.state.text.split(/\s+/).filter((t) => t.length > 0);
      nextText = applyEdits(tokens, candidate.edits ?? []).join(" ");
      nextCaret = nextText.length;
    } else {
      const before = this.state.text.slice(0, this.state.caret);
      const after = this.state.text.slice(this.state.caret);
      const glue = before.length > 0 && !before.endsWith(" ") ? " " : "";
      nextText = before + glue + candidate.text + after;
      nextCaret = (before + glue + candidate.text).length;
    }
    this.undoStack.push({ text: nextText, caret: nextCaret });
    this.state.text = nextText;
    this.state.caret = nextCaret;
    this.state.revision += 1;
    this.state.suggestions = [];
    this.state.fetchedAtRevision = null;
    this.state.selection = null;
    return true;
  }

  get canUndo(): boolean {
    return this.undoStack.canUndo;
  }

  get canRedo(): boolean {
    return this.undoStack.canRedo;
  }

  undo(): void {
    if (!this.undoStack.canUndo) return;
    const doc = this.undoStack.undo();
    this.state.text = doc.text;
    this.state.caret = doc.caret;
    this.state.revision += 1;
  }

  redo(): void {
    if (!this.undoStack.canRedo) return;
    const doc = this.undoStack.redo();
    this.state.text = doc.text;
    this.state.caret = doc.caret;
    this.state.revision += 1;
  }
}
