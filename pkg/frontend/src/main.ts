/**
 * Browser bootstrap: renders the session against the same origin that
 * served the page and wires the feedback controls. State lives on the
 * server; every action round-trips and re-renders from a fresh snapshot.
 */

import { ApiError, TriageClient } from "./api.js";
import { render_sample, renderClusterTree, renderDiff, renderTable } from "./render.js";
import type { FeedbackAction, SessionSnapshot } from "./types.js";

const POLL_MS = 800;

class App {
  private readonly client: TriageClient;
  private readonly root: HTMLElement;
  private snapshot: SessionSnapshot | null = null;
  private selected: string | null = null;

  constructor(root: HTMLElement, baseUrl: string) {
    this.root = root;
    this.client = new TriageClient(baseUrl);
  }

  async refresh(): Promise<void> {
    this.snapshot = await this.client.session();
    this.render();
  }

  private render(): void {
    if (this.snapshot === null) return;
    this.root.textContent = "";
    const panel = render_sample(this.snapshot);
    this.attachControls(panel);
    this.root.appendChild(panel);
    const detail = document.createElement("div");
    detail.className = "detail";
    this.root.appendChild(detail);
    if (this.selected !== null) void this.showPatch(this.selected, detail);
  }

  private attachControls(panel: HTMLElement): void {
    for (const row of panel.querySelectorAll<HTMLElement>(".ranked-row")) {
      const pid = row.dataset.patch;
      if (pid === undefined) continue;
      row.appendChild(this.button("view", () => this.select(pid)));
      row.appendChild(this.feedbackButton("reject", "reject_patch", pid));
      row.appendChild(this.feedbackButton("accept", "accept_patch", pid));
      const cid = row.dataset.cluster;
      if (cid !== undefined) {
        row.appendChild(this.feedbackButton("expand", "expand_cluster", cid));
        row.appendChild(this.feedbackButton("drop cluster", "reject_cluster", cid));
      }
    }
  }

  private button(label: string, onClick: () => void): HTMLButtonElement {
    const button = document.createElement("button");
    button.textContent = label;
    button.addEventListener("click", onClick);
    return button;
  }

  private feedbackButton(label: string, action: FeedbackAction, target: string): HTMLButtonElement {
    return this.button(label, () => void this.sendFeedback(action, target));
  }

  private async sendFeedback(action: FeedbackAction, target: string): Promise<void> {
    if (this.snapshot === null) return;
    try {
      await this.client.feedback(action, target, this.snapshot.revision);
    } catch (error) {
      // A stale revision just means another view advanced the session;
      // the refresh below reconverges either way.
      if (!(error instanceof ApiError)) throw error;
    }
    await this.refresh();
  }

  private select(pid: string): void {
    this.selected = pid;
    this.render();
  }

  private async showPatch(pid: string, into: HTMLElement): Promise<void> {
    const [diff, table, tree] = await Promise.all([
      this.client.diff(pid),
      this.client.table(pid),
      this.client.clusters(),
    ]);
    into.textContent = "";
    into.appendChild(renderDiff(diff));
    into.appendChild(renderTable(table));
    into.appendChild(renderClusterTree(tree));
    if (table.status === "computing") {
      window.setTimeout(() => {
        if (this.selected === pid) void this.showPatch(pid, into);
      }, POLL_MS);
    }
  }
}

const mount = document.getElementById("app");
if (mount !== null) {
  const app = new App(mount, "");
  void app.refresh();
}
