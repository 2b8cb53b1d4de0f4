/** Client-side thresholding of the returned probability raster and the
 * tinted RGBA overlay shown on top of the base image. */

import { Raster, makeRaster } from './raster.js'

/**
 * Re-binarize the 8-bit probability raster at a (0,1) threshold without a
 * new request; mirrors the server rule mask = prob8 >= round(t * 255).
 */
export function thresholdMask(prob: Raster, threshold: number): Raster {
  const cut = Math.round(threshold * 255)
  const out = makeRaster(prob.width, prob.height)
  for (let i = 0; i < prob.data.length; i++) {
    out.data[i] = prob.data[i] >= cut ? 255 : 0
  }
  return out
}

export function maskArea(mask: Raster): number {
  let n = 0
  for (const v of mask.data) if (v !== 0) n++
  return n
}

export interface Tint {
  r: number
  g: number
  b: number
}

/** RGBA pixel buffer: mask pixels tinted at `opacity`, elsewhere fully
 * transparent. Ready for ImageData. */
export function tintedOverlay(mask: Raster, tint: Tint, opacity: number): Uint8ClampedArray {
  const out = new Uint8ClampedArray(mask.width * mask.height * 4)
  const alpha = Math.round(Math.min(1, Math.max(0, opacity)) * 255)
  for (let i = 0; i < mask.data.length; i++) {
    if (mask.data[i] !== 0) {
      out[i * 4] = tint.r
      out[i * 4 + 1] = tint.g
      out[i * 4 + 2] = tint.b
      out[i * 4 + 3] = alpha
    }
  }
  return out
}
