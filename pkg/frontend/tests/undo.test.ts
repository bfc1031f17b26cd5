import { describe, expect, it } from "vitest";

import { UndoStack } from "../src/undo.js";

describe("UndoStack", () => {
  it("round-trips exactly", () => {
    const stack = new UndoStack({ text: "one", caret: 3 });
    stack.push({ text: "one two", caret: 7 });
    stack.push({ text: "one two three", caret: 13 });
    expect(stack.undo().text).toBe("one two");
    expect(stack.undo().text).toBe("one");
    expect(stack.canUndo).toBe(false);
    expect(stack.redo().text).toBe("one two");
    expect(stack.redo().text).toBe("one two three");
    expect(stack.canRedo).toBe(false);
  });

  it("a new edit clears the redo branch", () => {
    const stack = new UndoStack({ text: "a", caret: 1 });
    stack.push({ text: "ab", caret: 2 });
    stack.undo();
    stack.push({ text: "ax", caret: 2 });
    expect(stack.canRedo).toBe(false);
    expect(stack.current.text).toBe("ax");
  });

  it("undo at the bottom is a no-op", () => {
    const stack = new UndoStack({ text: "base", caret: 0 });
    expect(stack.undo().text).toBe("base");
  });
});
