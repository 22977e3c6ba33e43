/** Headless scripted session: drives the same flow the browser UI uses.
 *
 * Usage: node dist/scripted.js <service-url> <cluster-id> <n-rounds> <seed>
 * Prints a JSON record of the finished session (id, chosen directions and the
 * final summaries) so external tooling can audit the server event log and
 * replay the preference sequence offline.
 */

import { ApiClient } from "./api.js";
import { SessionFlow, mulberry32 } from "./session.js";

// minimal node surface; keeps the build free of @types/node
declare const process: { argv: string[]; exit(code?: number): never };

async function main(): Promise<void> {
  const [serviceUrl, clusterId, nRoundsArg, seedArg] = process.argv.slice(2);
  if (!serviceUrl || !clusterId) {
    console.error("usage: scripted.js <service-url> <cluster-id> [n-rounds] [seed]");
    process.exit(2);
  }
  const nRounds = parseInt(nRoundsArg ?? "10", 10);
  const seed = parseInt(seedArg ?? "1", 10);

  const api = new ApiClient(serviceUrl);
  const flow = new SessionFlow(api);
  await flow.start(clusterId, "april", nRounds, seed);

  const chooser = mulberry32(seed);
  const directions: ("left" | "right")[] = [];
  while (flow.status === "awaiting_preference") {
    const view = flow.currentRound();
    if (!view) break;
    const chosen: "left" | "right" = chooser() < 0.5 ? "left" : "right";
    directions.push(chosen);
    await flow.prefer(chosen);
  }

  let result = await flow.pollResult();
  while (result.status !== "done") {
    await new Promise((resolve) => setTimeout(resolve, 1000));
    result = await flow.pollResult();
  }

  const { a, b, assignment } = flow.comparison(result);
  const finalPreference = a.token_count >= b.token_count ? "A" : "B";
  await flow.judge(assignment, finalPreference, { A: 4, B: 3 });

  console.log(
    JSON.stringify({
      session_id: flow.sessionId,
      directions,
      assignment,
      final_preference: finalPreference,
      with_interaction: result.with_interaction,
      no_interaction: result.no_interaction,
    }),
  );
}

main().catch((err) => {
  console.error(String(err));
  process.exit(1);
});
