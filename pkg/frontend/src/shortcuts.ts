/** Keyboard shortcuts: Ctrl+' completion, Ctrl+, polish, Ctrl+M correct. */

import type { FunctionTab } from "./state.js";

export function tabForShortcut(event: {
  ctrlKey: boolean;
  metaKey?: boolean;
  key: string;
}): FunctionTab | null {
  if (!event.ctrlKey && !event.metaKey) return null;
  switch (event.key) {
    case "'":
      return "complete";
    case ",":
      return "polish";
    case "m":
    case "M":
      return "correct";
    default:
      return null;
  }
}
