export { CliError } from "./runner";
export { asBoxBatch, asSingleBox, BoxInput } from "./boxes";
export {
  angleDelta,
  decode,
  encode,
  FeatureMapInput,
  iouMatrix,
  IouMatrix,
  iouPairwise,
  nms,
  roiPool,
  roiPoolBackward,
  RoiPoolResult,
  rotatedIou,
} from "./kernels";
