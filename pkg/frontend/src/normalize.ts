/** HU windowing for network input/output: [-1024, 3072] HU maps to [-1, 1]. */

export const HU_MIN = -1024;
export const HU_MAX = 3072;
export const HU_CENTER = (HU_MIN + HU_MAX) / 2; // 1024
export const HU_HALF_RANGE = (HU_MAX - HU_MIN) / 2; // 2048

/** Absolute HU value -> [-1, 1]. */
export function normalizeHU(values: Float32Array): Float32Array {
  const out = new Float32Array(values.length);
  for (let i = 0; i < values.length; i++) {
    out[i] = (values[i] - HU_CENTER) / HU_HALF_RANGE;
  }
  return out;
}

/** [-1, 1] -> absolute HU. */
export function denormalizeHU(values: Float32Array): Float32Array {
  const out = new Float32Array(values.length);
  for (let i = 0; i < values.length; i++) {
    out[i] = values[i] * HU_HALF_RANGE + HU_CENTER;
  }
  return out;
}

/**
 * HU difference (e.g. an artifact image) -> normalized units. Differences
 * carry no offset, only the scale.
 */
export function scaleHUDelta(values: Float32Array): Float32Array {
  const out = new Float32Array(values.length);
  for (let i = 0; i < values.length; i++) out[i] = values[i] / HU_HALF_RANGE;
  return out;
}

export function unscaleHUDelta(values: Float32Array): Float32Array {
  const out = new Float32Array(values.length);
  for (let i = 0; i < values.length; i++) out[i] = values[i] * HU_HALF_RANGE;
  return out;
}
