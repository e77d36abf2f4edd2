/**
 * refine.ts — score fusion, pseudo-label assignment, IoU, and greedy NMS.
 */

import { Roi, checkRoi } from "./tensor.js";

/** Weighted average (sb + alpha*sr) / (1 + alpha), element-wise.
 *
 * Evaluated as sb + (sr - sb) * alpha/(1+alpha) so alpha = 0 returns sb
 * exactly and equal inputs are an exact fixed point.
 */
export function fuseScores(sb: number[], sr: number[], alpha = 1.0): number[] {
  if (sb.length !== sr.length) {
    throw new RangeError(`score lengths differ: ${sb.length} vs ${sr.length}`);
  }
  if (!(Number.isFinite(alpha) && alpha >= 0)) {
    throw new RangeError(`alpha must be finite and >= 0, got ${alpha}`);
  }
  const t = alpha / (1.0 + alpha);
  return sb.map((b, i) => b + (sr[i] - b) * t);
}

/** Foreground class a background-labeled RoI borrows its mask from. */
export function assignPseudoLabel(scores: number[], backgroundIndex = 0): number {
  if (scores.length < 2) {
    throw new RangeError(`need at least 2 classes, got ${scores.length}`);
  }
  if (backgroundIndex < 0 || backgroundIndex >= scores.length) {
    throw new RangeError(`background index ${backgroundIndex} out of range`);
  }
  let best = -1;
  let bestFg = -1;
  for (let i = 0; i < scores.length; i++) {
    if (best < 0 || scores[i] > scores[best]) best = i;
    if (i !== backgroundIndex && (bestFg < 0 || scores[i] > scores[bestFg])) bestFg = i;
  }
  return best === backgroundIndex ? bestFg : best;
}

const area = (b: Roi) => (b.x2 - b.x1) * (b.y2 - b.y1);

/** Intersection over union of two boxes; 0 when disjoint. */
export function iou(a: Roi, b: Roi): number {
  checkRoi(a);
  checkRoi(b);
  const ix = Math.min(a.x2, b.x2) - Math.max(a.x1, b.x1);
  const iy = Math.min(a.y2, b.y2) - Math.max(a.y1, b.y1);
  if (ix <= 0 || iy <= 0) return 0;
  const inter = ix * iy;
  return inter / (area(a) + area(b) - inter);
}

/** Greedy NMS: keep the best remaining box, drop overlaps above the threshold. */
export function nms(boxes: Roi[], scores: number[], threshold: number): number[] {
  if (boxes.length !== scores.length) {
    throw new RangeError(`${boxes.length} boxes but ${scores.length} scores`);
  }
  if (!(threshold >= 0 && threshold <= 1)) {
    throw new RangeError(`threshold must lie in [0, 1], got ${threshold}`);
  }
  const order = boxes.map((_, i) => i).sort((i, j) => scores[j] - scores[i] || i - j);
  const alive = new Array(boxes.length).fill(true);
  const kept: number[] = [];
  for (const i of order) {
    if (!alive[i]) continue;
    kept.push(i);
    for (const j of order) {
      if (alive[j] && j !== i && iou(boxes[i], boxes[j]) > threshold) {
        alive[j] = false;
      }
    }
  }
  return kept;
}
