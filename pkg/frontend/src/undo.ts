/** Snapshot-based undo/redo over immutable document states. */

export interface DocumentState {
  text: string;
  caret: number;
}

export class UndoStack {
  private past: DocumentState[] = [];
  private future: DocumentState[] = [];

  constructor(public current: DocumentState) {}

  /** Record a new state; clears the redo branch. */
  push(next: DocumentState): void {
    this.past.push(this.current);
    this.current = next;
    this.future = [];
  }

  get canUndo(): boolean {
    return this.past.length > 0;
  }

  get canRedo(): boolean {
    return this.future.length > 0;
  }

  undo(): DocumentState {
    if (!this.canUndo) return this.current;
    this.future.push(this.current);
    this.current = this.past.pop()!;
    return this.current;
  }

  redo(): DocumentState {
    if (!this.canRedo) return this.current;
    this.past.push(this.current);
    this.current = this.future.pop()!;
    return this.current;
  }
}
