import { describe, expect, it, vi } from "vitest";

import { ApiClient } from "../src/api.js";
import { SessionFlow, hashToken, mulberry32 } from "../src/session.js";

type Handler = (url: string, init?: RequestInit) => { status: number; body: unknown };

function fakeFetch(handler: Handler) {
  return vi.fn(async (url: string, init?: RequestInit) => {
    const { status, body } = handler(url, init);
    return {
      ok: status >= 200 && status < 300,
      status,
      json: async () => body,
    } as Response;
  });
}

function summary(id: number) {
  return { id, sentences: [`sentence ${id}`], token_count: 10 + id };
}

function serverScript(nRounds: number) {
  let round = 1;
  const submitted: Array<{ round: number; chosen: string }> = [];
  const handler: Handler = (url, init) => {
    if (url.endsWith("/sessions") && init?.method === "POST") {
      return {
        status: 200,
        body: {
          status: "awaiting_preference",
          session_id: "s-123",
          round,
          n_rounds: nRounds,
          left: summary(0),
          right: summary(1),
          background: ["abstract one", "abstract two"],
        },
      };
    }
    if (url.includes("/preference")) {
      const payload = JSON.parse(String(init?.body));
      submitted.push(payload);
      if (payload.round >= nRounds) {
        return { status: 200, body: { status: "training" } };
      }
      round = payload.round + 1;
      return {
        status: 200,
        body: {
          status: "awaiting_preference",
          round,
          n_rounds: nRounds,
          left: summary(round),
          right: summary(round + 1),
        },
      };
    }
    if (url.endsWith("/pair")) {
      return {
        status: 200,
        body: {
          status: "awaiting_preference",
          round,
          n_rounds: nRounds,
          left: summary(round),
          right: summary(round + 1),
        },
      };
    }
    if (url.endsWith("/result") && init?.method === "POST") {
      return { status: 200, body: { status: "recorded" } };
    }
    if (url.endsWith("/result")) {
      return {
        status: 200,
        body: {
          status: "done",
          with_interaction: summary(90),
          no_interaction: summary(91),
        },
      };
    }
    return { status: 404, body: { detail: { code: "unknown" } } };
  };
  return { handler, submitted };
}

describe("SessionFlow", () => {
  it("runs the full round loop and reaches training", async () => {
    const { handler, submitted } = serverScript(3);
    const flow = new SessionFlow(new ApiClient("http://test", fakeFetch(handler)));
    await flow.start("cluster-a", "april", 3);
    expect(flow.sessionId).toBe("s-123");
    expect(flow.background).toHaveLength(2);
    expect(flow.currentRound()?.round).toBe(1);
    expect(flow.currentRound()?.nRounds).toBe(3);

    while (flow.status === "awaiting_preference") {
      await flow.prefer("left");
    }
    expect(flow.status).toBe("training");
    expect(submitted.map((s) => s.round)).toEqual([1, 2, 3]);
  });

  it("double submit is suppressed while in flight", async () => {
    const { handler, submitted } = serverScript(2);
    let release: (() => void) | null = null;
    const gate = new Promise<void>((resolve) => (release = resolve));
    const slowFetch = vi.fn(async (url: string, init?: RequestInit) => {
      if (url.includes("/preference")) await gate;
      const { status, body } = handler(url, init);
      return { ok: true, status, json: async () => body } as Response;
    });
    const flow = new SessionFlow(new ApiClient("http://test", slowFetch));
    await flow.start("cluster-a", "april", 2);

    const first = flow.prefer("left");
    const second = flow.prefer("right"); // double click during flight
    release!();
    const [a, b] = await Promise.all([first, second]);
    expect(a).not.toBeNull();
    expect(b).toBeNull();
    expect(submitted).toHaveLength(1);
  });

  it("restores state from the server after a refresh", async () => {
    const { handler } = serverScript(5);
    const flow = new SessionFlow(new ApiClient("http://test", fakeFetch(handler)));
    await flow.restore("s-123");
    expect(flow.status).toBe("awaiting_preference");
    expect(flow.currentRound()?.round).toBe(1);
  });

  it("position shuffle is deterministic per session and round", async () => {
    const { handler } = serverScript(4);
    const make = async () => {
      const flow = new SessionFlow(new ApiClient("http://test", fakeFetch(handler)));
      await flow.restore("s-123");
      return flow.currentRound()!.positions;
    };
    expect(await make()).toEqual(await make());
  });

  it("comparison labels both summaries and records the assignment", async () => {
    const { handler } = serverScript(1);
    const flow = new SessionFlow(new ApiClient("http://test", fakeFetch(handler)));
    await flow.start("cluster-a", "april", 1);
    const result = await flow.pollResult();
    const { a, b, assignment } = flow.comparison(result);
    expect(new Set([assignment.A, assignment.B])).toEqual(
      new Set(["with_interaction", "no_interaction"]),
    );
    const ids = new Set([a.id, b.id]);
    expect(ids).toEqual(new Set([90, 91]));
  });
});

describe("deterministic rng", () => {
  it("mulberry32 streams are reproducible", () => {
    const a = mulberry32(42);
    const b = mulberry32(42);
    for (let i = 0; i < 10; i++) expect(a()).toBe(b());
  });

  it("hashToken is stable", () => {
    expect(hashToken("abc")).toBe(hashToken("abc"));
    expect(hashToken("abc")).not.toBe(hashToken("abd"));
  });
});
