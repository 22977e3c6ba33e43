/** DOM rendering for the study flow: intro, rounds, waiting, final judgement. */

import { ApiClient, SummaryView } from "./api.js";
import { SessionFlow } from "./session.js";

const POLL_INTERVAL_MS = 2000;

function el<K extends keyof HTMLElementTagNameMap>(
  tag: K,
  className?: string,
  text?: string,
): HTMLElementTagNameMap[K] {
  const node = document.createElement(tag);
  if (className) node.className = className;
  if (text) node.textContent = text;
  return node;
}

function summaryCard(title: string, summary: SummaryView): HTMLElement {
  const card = el("div", "summary-card");
  card.appendChild(el("h3", undefined, title));
  const body = el("div", "summary-body");
  for (const sentence of summary.sentences) {
    body.appendChild(el("p", "summary-sentence", sentence));
  }
  card.appendChild(body);
  card.appendChild(el("div", "token-count", `${summary.token_count} tokens`));
  return card;
}

export class App {
  private root: HTMLElement;
  private flow: SessionFlow;
  private keyHandler: ((ev: KeyboardEvent) => void) | null = null;

  constructor(root: HTMLElement, api: ApiClient) {
    this.root = root;
    this.flow = new SessionFlow(api);
    void this.renderStart(api);
  }

  private clear(): void {
    this.root.replaceChildren();
    if (this.keyHandler) {
      document.removeEventListener("keydown", this.keyHandler);
      this.keyHandler = null;
    }
  }

  private banner(message: string, retry: () => void): void {
    const bar = el("div", "error-banner");
    bar.appendChild(el("span", undefined, message));
    const button = el("button", undefined, "Retry");
    button.addEventListener("click", () => {
      bar.remove();
      retry();
    });
    bar.appendChild(button);
    this.root.prepend(bar);
  }

  private async renderStart(api: ApiClient): Promise<void> {
    this.clear();
    const box = el("div", "panel");
    box.appendChild(el("h1", undefined, "Summary preference study"));
    let clusters: string[] = [];
    try {
      clusters = (await api.health()).clusters;
    } catch {
      this.banner("Service unreachable.", () => void this.renderStart(api));
      return;
    }

    const params = new URLSearchParams(window.location.search);
    const resume = params.get("session");
    if (resume) {
      try {
        await this.flow.restore(resume);
        this.afterRestore();
        return;
      } catch {
        // fall through to a fresh start form
      }
    }

    const form = el("div", "start-form");
    const clusterSelect = el("select");
    for (const id of clusters) {
      const opt = el("option", undefined, id) as HTMLOptionElement;
      opt.value = id;
      clusterSelect.appendChild(opt);
    }
    const systemSelect = el("select");
    for (const id of ["april", "sppi"]) {
      const opt = el("option", undefined, id) as HTMLOptionElement;
      opt.value = id;
      systemSelect.appendChild(opt);
    }
    const rounds = el("input") as HTMLInputElement;
    rounds.type = "number";
    rounds.value = "10";
    rounds.min = "1";
    const go = el("button", "primary", "Start session");
    go.addEventListener("click", async () => {
      go.disabled = true;
      try {
        await this.flow.start(
          (clusterSelect as HTMLSelectElement).value,
          (systemSelect as HTMLSelectElement).value as "april" | "sppi",
          parseInt(rounds.value, 10),
        );
        const url = new URL(window.location.href);
        url.searchParams.set("session", this.flow.sessionId ?? "");
        window.history.replaceState(null, "", url);
        this.renderBackground();
      } catch (err) {
        go.disabled = false;
        this.banner(`Could not start: ${err}`, () => void 0);
      }
    });
    form.append("Topic: ", clusterSelect, " System: ", systemSelect, " Rounds: ", rounds, go);
    box.appendChild(form);
    this.root.appendChild(box);
  }

  private afterRestore(): void {
    if (this.flow.status === "awaiting_preference") this.renderRound();
    else if (this.flow.status === "training") this.renderWaiting();
    else this.renderResult();
  }

  private renderBackground(): void {
    this.clear();
    const box = el("div", "panel");
    box.appendChild(el("h2", undefined, "Topic background"));
    box.appendChild(
      el("p", "hint", "Read these abstracts first, then judge which summary covers the topic better."),
    );
    for (const text of this.flow.background) {
      box.appendChild(el("p", "background", text));
    }
    const go = el("button", "primary", "Begin round 1");
    go.addEventListener("click", () => this.renderRound());
    box.appendChild(go);
    this.root.appendChild(box);
  }

  private renderRound(): void {
    this.clear();
    const view = this.flow.currentRound();
    if (!view) {
      this.renderWaiting();
      return;
    }
    const box = el("div", "panel");
    box.appendChild(el("h2", undefined, `Round ${view.round} of ${view.nRounds}`));
    box.appendChild(el("p", "hint", "Pick the better summary (or press the left/right arrow key)."));
    const row = el("div", "pair-row");

    const bySide = { left: view.left, right: view.right } as const;
    const buttons: HTMLButtonElement[] = [];
    view.positions.forEach((side, i) => {
      const cell = el("div", "pair-cell");
      cell.appendChild(summaryCard(i === 0 ? "Summary A" : "Summary B", bySide[side]));
      const pick = el("button", "primary", i === 0 ? "Prefer A (←)" : "Prefer B (→)");
      pick.addEventListener("click", () => void submit(side));
      buttons.push(pick);
      cell.appendChild(pick);
      row.appendChild(cell);
    });
    box.appendChild(row);
    this.root.appendChild(box);

    const submit = async (side: "left" | "right") => {
      if (this.flow.pendingSubmit) return;
      buttons.forEach((b) => (b.disabled = true));
      try {
        const payload = await this.flow.prefer(side);
        if (payload?.status === "training") this.renderWaiting();
        else this.renderRound();
      } catch (err) {
        buttons.forEach((b) => (b.disabled = false));
        this.banner(`Could not submit: ${err}`, () => void submit(side));
      }
    };

    this.keyHandler = (ev: KeyboardEvent) => {
      if (ev.key === "ArrowLeft") void submit(view.positions[0]);
      if (ev.key === "ArrowRight") void submit(view.positions[1]);
    };
    document.addEventListener("keydown", this.keyHandler);
  }

  private renderWaiting(): void {
    this.clear();
    const box = el("div", "panel");
    box.appendChild(el("h2", undefined, "Computing your summary"));
    box.appendChild(el("p", "hint", "Training runs for a couple of minutes. This page polls automatically."));
    this.root.appendChild(box);
    const poll = async () => {
      try {
        const result = await this.flow.pollResult();
        if (result.status === "done") {
          this.renderResult(result);
          return;
        }
      } catch {
        // transient; keep polling
      }
      window.setTimeout(poll, POLL_INTERVAL_MS);
    };
    void poll();
  }

  private async renderResult(resultIn?: import("./api.js").ResultPayload): Promise<void> {
    const result = resultIn ?? (await this.flow.pollResult());
    if (result.status !== "done") {
      this.renderWaiting();
      return;
    }
    this.clear();
    const { a, b, assignment } = this.flow.comparison(result);
    const box = el("div", "panel");
    box.appendChild(el("h2", undefined, "Final judgement"));
    box.appendChild(el("p", "hint", "Which summary is better overall?"));
    const row = el("div", "pair-row");
    row.appendChild(summaryCard("Summary A", a));
    row.appendChild(summaryCard("Summary B", b));
    box.appendChild(row);

    const ratings = el("div", "ratings");
    const ratingInputs: Record<string, HTMLSelectElement> = {};
    for (const label of ["A", "B"]) {
      const select = el("select") as HTMLSelectElement;
      for (let v = 1; v <= 5; v++) {
        const opt = el("option", undefined, String(v)) as HTMLOptionElement;
        opt.value = String(v);
        select.appendChild(opt);
      }
      select.value = "3";
      ratingInputs[label] = select;
      ratings.append(` Rating ${label} (1-5): `, select);
    }
    box.appendChild(ratings);

    for (const choice of ["A", "B"] as const) {
      const btn = el("button", "primary", `Prefer ${choice}`);
      btn.addEventListener("click", async () => {
        btn.disabled = true;
        await this.flow.judge(assignment, choice, {
          A: parseInt(ratingInputs.A.value, 10),
          B: parseInt(ratingInputs.B.value, 10),
        });
        this.renderDone();
      });
      box.appendChild(btn);
    }
    this.root.appendChild(box);
  }

  private renderDone(): void {
    this.clear();
    const box = el("div", "panel");
    box.appendChild(el("h2", undefined, "Thank you"));
    box.appendChild(el("p", "hint", "Your judgement was recorded."));
    this.root.appendChild(box);
  }
}
