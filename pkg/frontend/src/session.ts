/** Session flow state machine.
 *
 * All truth lives server-side: this object only tracks the session token,
 * the latest server payload and an in-flight guard so a double click cannot
 * produce two submissions.  A hard refresh restores from GET /pair.
 */

import { ApiClient, PairPayload, ResultPayload, SummaryView } from "./api.js";

export type Screen =
  | { kind: "intro"; background: string[] }
  | { kind: "round"; round: number; nRounds: number; left: SummaryView; right: SummaryView }
  | { kind: "waiting" }
  | { kind: "compare"; a: SummaryView; b: SummaryView; assignment: Record<string, string> }
  | { kind: "done" };

/** Deterministic per-session RNG for blind left/right and A/B shuffles. */
export function mulberry32(seed: number): () => number {
  let state = seed >>> 0;
  return () => {
    state = (state + 0x6d2b79f5) >>> 0;
    let t = state;
    t = Math.imul(t ^ (t >>> 15), t | 1);
    t ^= t + Math.imul(t ^ (t >>> 7), t | 61);
    return ((t ^ (t >>> 14)) >>> 0) / 4294967296;
  };
}

export function hashToken(token: string): number {
  let h = 2166136261;
  for (let i = 0; i < token.length; i++) {
    h ^= token.charCodeAt(i);
    h = Math.imul(h, 16777619);
  }
  return h >>> 0;
}

export interface RoundView {
  round: number;
  nRounds: number;
  /** positions[0] is rendered on the left of the screen */
  positions: ["left", "right"] | ["right", "left"];
  left: SummaryView;
  right: SummaryView;
}

export class SessionFlow {
  sessionId: string | null = null;
  background: string[] = [];
  private latest: PairPayload | null = null;
  private inFlight = false;
  private rng: (() => number) | null = null;
  private shuffles = new Map<number, ["left", "right"] | ["right", "left"]>();

  constructor(private readonly api: ApiClient) {}

  get pendingSubmit(): boolean {
    return this.inFlight;
  }

  get status(): string {
    return this.latest?.status ?? "idle";
  }

  async start(clusterId: string, system: "april" | "sppi", nRounds: number, seed?: number): Promise<void> {
    const payload = await this.api.createSession({
      cluster_id: clusterId,
      system,
      n_rounds: nRounds,
      seed,
    });
    if (!payload.session_id) throw new Error("server returned no session id");
    this.sessionId = payload.session_id;
    this.background = payload.background ?? [];
    this.latest = payload;
    this.rng = mulberry32(hashToken(payload.session_id));
  }

  /** Re-attach to an existing session after a refresh. */
  async restore(sessionId: string): Promise<void> {
    this.sessionId = sessionId;
    this.rng = mulberry32(hashToken(sessionId));
    this.latest = await this.api.getPair(sessionId);
  }

  currentRound(): RoundView | null {
    const p = this.latest;
    if (!p || p.status !== "awaiting_preference" || !p.left || !p.right || !p.round) return null;
    return {
      round: p.round,
      nRounds: p.n_rounds ?? 0,
      positions: this.shuffleFor(p.round),
      left: p.left,
      right: p.right,
    };
  }

  /** Blind display order for one round, stable under re-render. */
  private shuffleFor(round: number): ["left", "right"] | ["right", "left"] {
    let order = this.shuffles.get(round);
    if (!order) {
      order = this.rng && this.rng() < 0.5 ? ["right", "left"] : ["left", "right"];
      this.shuffles.set(round, order);
    }
    return order;
  }

  /** Submit the preference for the current round; no-op while in flight. */
  async prefer(chosen: "left" | "right"): Promise<PairPayload | null> {
    if (this.inFlight) return null;
    const view = this.currentRound();
    if (!this.sessionId || !view) return null;
    this.inFlight = true;
    try {
      const payload = await this.api.postPreference(this.sessionId, view.round, chosen);
      this.latest = payload;
      return payload;
    } finally {
      this.inFlight = false;
    }
  }

  async pollResult(): Promise<ResultPayload> {
    if (!this.sessionId) throw new Error("no session");
    return this.api.getResult(this.sessionId);
  }

  /** Final blind comparison: A/B order is randomized from the session token. */
  comparison(result: ResultPayload): { a: SummaryView; b: SummaryView; assignment: Record<string, string> } {
    if (!result.with_interaction || !result.no_interaction) throw new Error("result incomplete");
    const flip = this.rng ? this.rng() < 0.5 : false;
    const assignment = flip
      ? { A: "no_interaction", B: "with_interaction" }
      : { A: "with_interaction", B: "no_interaction" };
    return {
      a: flip ? result.no_interaction : result.with_interaction,
      b: flip ? result.with_interaction : result.no_interaction,
      assignment,
    };
  }

  async judge(
    assignment: Record<string, string>,
    finalPreference: "A" | "B",
    ratings?: Record<string, number>,
  ): Promise<void> {
    if (!this.sessionId) throw new Error("no session");
    await this.api.ackResult(this.sessionId, {
      final_preference: finalPreference,
      assignment,
      ratings,
    });
  }
}
