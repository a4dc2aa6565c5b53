export { EnvClient, connectWithRetry, ProtocolFailure } from "./client.js";
export type { Observation } from "./client.js";
export { gae, discountedReturns } from "./gae.js";
export { ActorCritic } from "./model.js";
export type { GridShape, StepObservation } from "./model.js";
export { PpoUpdater, DEFAULT_CONFIG, surrogateTerms, normalized } from "./ppo.js";
export type { Batch, PpoConfig, UpdateStats } from "./ppo.js";
export { collectRollout, runEpisode, RewardScaler } from "./rollout.js";
export { saveCheckpoint, loadCheckpoint } from "./checkpoint.js";
export { Rng } from "./rng.js";
export { train } from "./train.js";
export { evaluate } from "./evaluate.js";
