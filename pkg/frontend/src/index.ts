export { Rng, parseSeed } from "./rng.js";
export { Batch3, batch3, transpose12, Param, zeroGrads } from "./tensor.js";
export {
  Layer,
  Conv1d,
  ConvTranspose1d,
  BatchNorm1d,
  LeakyReLU,
  Linear,
  LayerNorm,
  convOutLength,
} from "./layers.js";
export { MultiHeadAttention, AttentionBlock } from "./attention.js";
export {
  Caeformer,
  NetConfig,
  DEFAULT_NET_CONFIG,
  validateNetConfig,
  encoderLadder,
} from "./model.js";
export {
  DATASET_SCHEMA,
  PREDICTION_SCHEMA,
  DatasetHeader,
  RecordBatch,
  PredictionIds,
  readDatasetHeader,
  loadRecords,
  writePredictions,
  nmseOver,
} from "./dataset.js";
export {
  CHECKPOINT_SCHEMA,
  lrAtEpoch,
  stratifiedSplit,
  fitScales,
  gather,
  mseLoss,
  evalLoss,
  train,
  predict,
  metrics,
  saveCheckpoint,
  loadCheckpoint,
  EpochStats,
  TrainResult,
  Scales,
  MetricsReport,
  LoadedModel,
} from "./train.js";
export { main as cliMain } from "./cli.js";
