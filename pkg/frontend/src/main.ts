/** Browser wiring: plain-text editor on the left, suggestion pane right. */

import { ServiceClient } from "./api.js";
import { tabForShortcut } from "./shortcuts.js";
import { EditorController, FunctionTab } from "./state.js";

const TABS: FunctionTab[] = ["complete", "polish", "correct", "infill"];

export function mount(root: HTMLElement, baseUrl = ""): EditorController {
  const controller = new EditorController(new ServiceClient(baseUrl));

  root.innerHTML = `
    <div class="pad">
      <div class="left">
        <textarea class="editor" spellcheck="false"></textarea>
        <div class="status"></div>
      </div>
      <div class="right">
        <div class="tabs"></div>
        <input class="keywords" placeholder="keywords, comma separated" hidden>
        <ul class="suggestions"></ul>
        <div class="hint">Ctrl+' complete &middot; Ctrl+, polish &middot; Ctrl+M correct</div>
      </div>
    </div>`;

  const editor = root.querySelector<HTMLTextAreaElement>(".editor")!;
  const status = root.querySelector<HTMLElement>(".status")!;
  const tabBar = root.querySelector<HTMLElement>(".tabs")!;
  const keywordBox = root.querySelector<HTMLInputElement>(".keywords")!;
  const list = root.querySelector<HTMLUListElement>(".suggestions")!;

  const render = () => {
    if (editor.value !== controller.state.text) {
      editor.value = controller.state.text;
      editor.setSelectionRange(controller.state.caret, controller.state.caret);
    }
    status.textContent = controller.state.banner ?? "";
    keywordBox.hidden = controller.state.activeTab !== "infill";
    tabBar.querySelectorAll("button").forEach((b) => {
      b.classList.toggle("active", b.dataset.tab === controller.state.activeTab);
    });
    list.innerHTML = "";
    controller.state.suggestions.forEach((candidate, index) => {
      const item = document.createElement("li");
      item.textContent = `${candidate.text}  (${candidate.score.toFixed(3)})`;
      item.addEventListener("click", () => {
        controller.apply(index);
        render();
      });
      list.appendChild(item);
    });
  };

  for (const tab of TABS) {
    const button = document.createElement("button");
    button.textContent = tab;
    button.dataset.tab = tab;
    button.addEventListener("click", async () => {
      controller.state.activeTab = tab;
      const keywords = keywordBox.value
        .split(",")
        .map((k) => k.trim())
        .filter(Boolean);
      await controller.trigger(tab, keywords);
      render();
    });
    tabBar.appendChild(button);
  }

  editor.addEventListener("input", () => {
    controller.setText(editor.value, editor.selectionStart);
    render();
  });
  editor.addEventListener("select", () => {
    controller.setSelection({
      start: editor.selectionStart,
      end: editor.selectionEnd,
    });
  });
  editor.addEventListener("keyup", () => {
    controller.setCaret(editor.selectionStart);
  });
  editor.addEventListener("keydown", async (event) => {
    if ((event.ctrlKey || event.metaKey) && event.key === "z") {
      event.preventDefault();
      controller.undo();
      render();
      return;
    }
    if ((event.ctrlKey || event.metaKey) && event.key === "y") {
      event.preventDefault();
      controller.redo();
      render();
      return;
    }
    const tab = tabForShortcut(event);
    if (tab) {
      event.preventDefault();
      controller.setSelection({
        start: editor.selectionStart,
        end: editor.selectionEnd,
      });
      controller.setCaret(editor.selectionStart);
      await controller.trigger(tab);
      render();
    }
  });

  render();
  return controller;
}

if (typeof document !== "undefined") {
  const root = document.getElementById("app");
  if (root) mount(root);
}
