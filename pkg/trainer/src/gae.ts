/**
 * Generalized advantage estimation.
 *
 * advantage_t = sum_{l>=0} (gamma*lambda)^l * delta_{t+l}, with
 * delta_t = r_t + gamma * V(s_{t+1}) - V(s_t) and V(s_T) the bootstrap.
 * With lambda = 1 this telescopes to the discounted return minus the value
 * baseline.
 */

export function gae(
  rewards: number[],
  values: number[],
  gamma: number,
  lambda: number,
  bootstrap = 0,
): number[] {
  if (rewards.length !== values.length) {
    throw new Error(
      `length mismatch: ${rewards.length} rewards vs ${values.length} values`,
    );
  }
  const T = rewards.length;
  const advantages = new Array<number>(T).fill(0);
  let running = 0;
  for (let t = T - 1; t >= 0; t--) {
    const nextValue = t === T - 1 ? bootstrap : values[t + 1];
    const delta = rewards[t] + gamma * nextValue - values[t];
    running = delta + gamma * lambda * running;
    advantages[t] = running;
  }
  return advantages;
}

/** Discounted returns (advantage targets for the value head). */
export function discountedReturns(
  rewards: number[],
  gamma: number,
  bootstrap = 0,
): number[] {
  const T = rewards.length;
  const out = new Array<number>(T).fill(0);
  let running = bootstrap;
  for (let t = T - 1; t >= 0; t--) {
    running = rewards[t] + gamma * running;
    out[t] = running;
  }
  return out;
}
