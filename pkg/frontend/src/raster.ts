/** Grayscale raster buffers and polyline stroke rasterization. */

export interface Raster {
  width: number
  height: number
  data: Uint8Array // row-major, one byte per pixel
}

export interface Point {
  x: number
  y: number
}

export function makeRaster(width: number, height: number, fill = 0): Raster {
  const data = new Uint8Array(width * height)
  if (fill) data.fill(fill)
  return { width, height, data }
}

export function cloneRaster(r: Raster): Raster {
  return { width: r.width, height: r.height, data: new Uint8Array(r.data) }
}

export function rastersEqual(a: Raster, b: Raster): boolean {
  if (a.width !== b.width || a.height !== b.height) return false
  for (let i = 0; i < a.data.length; i++) if (a.data[i] !== b.data[i]) return false
  return true
}

const clamp = (v: number, lo: number, hi: number) => Math.min(hi, Math.max(lo, v))

/** Stamp a filled disc; the center is clamped into bounds first. */
function stampDisc(r: Raster, cx: number, cy: number, radius: number, value: number) {
  const x0 = clamp(Math.round(cx), 0, r.width - 1)
  const y0 = clamp(Math.round(cy), 0, r.height - 1)
  const rad = Math.max(0, radius)
  const r2 = rad * rad
  for (let y = Math.max(0, y0 - rad); y <= Math.min(r.height - 1, y0 + rad); y++) {
    for (let x = Math.max(0, x0 - rad); x <= Math.min(r.width - 1, x0 + rad); x++) {
      const dx = x - x0
      const dy = y - y0
      if (dx * dx + dy * dy <= r2) r.data[y * r.width + x] = value
    }
  }
}

/**
 * Rasterize a polyline with round caps: discs stamped densely along each
 * segment. Out-of-bounds points are clamped, matching the canvas contract.
 * Value 0 erases.
 */
export function drawPolyline(r: Raster, points: Point[], radius: number, value: number) {
  if (points.length === 0) return
  stampDisc(r, points[0].x, points[0].y, radius, value)
  for (let i = 1; i < points.length; i++) {
    const a = points[i - 1]
    const b = points[i]
    const steps = Math.max(1, Math.ceil(Math.hypot(b.x - a.x, b.y - a.y)))
    for (let s = 1; s <= steps; s++) {
      const t = s / steps
      stampDisc(r, a.x + (b.x - a.x) * t, a.y + (b.y - a.y) * t, radius, value)
    }
  }
}

/** Count of non-zero pixels. */
export function nonZeroCount(r: Raster): number {
  let n = 0
  for (const v of r.data) if (v !== 0) n++
  return n
}
