/** sara-bindings: typed-array bindings for the sara RoI pooling kernels. */

export { VERSION } from "./version.js";
export {
  boundaryCopyCount,
  resetBoundaryCopyCount,
  asFloat32View,
  type BoundView,
  type FeatureDims,
  type Grid,
  type Roi,
} from "./tensor.js";
export { tensorBytes, tensorFromBytes, type Tensor, FORMAT_VERSION, DTYPE_F32 } from "./format.js";
export {
  roiAlign,
  saRoiAlign,
  roiAlignBackward,
  saRoiAlignBackward,
  type PooledResult,
  type GradResult,
  type ProbInput,
} from "./kernels.js";
export { fuseScores, assignPseudoLabel, iou, nms } from "./refine.js";
