/** The editable doodle layer: strokes, eraser, undo, class re-encoding. */

import { Raster, Point, makeRaster, cloneRaster, drawPolyline } from './raster.js'

export class DoodleLayer {
  readonly width: number
  readonly height: number
  private raster: Raster
  private undoStack: Raster[] = []

  constructor(width: number, height: number) {
    this.width = width
    this.height = height
    this.raster = makeRaster(width, height)
  }

  /** Snapshot-then-draw; undo restores the exact prior bytes. */
  drawStroke(points: Point[], radius: number, value: number) {
    this.undoStack.push(cloneRaster(this.raster))
    drawPolyline(this.raster, points, radius, value)
  }

  erase(points: Point[], radius: number) {
    this.drawStroke(points, radius, 0)
  }

  undo(): boolean {
    const prev = this.undoStack.pop()
    if (!prev) return false
    this.raster = prev
    return true
  }

  get undoDepth(): number {
    return this.undoStack.length
  }

  /**
   * Rewrite every existing stroke pixel to carry `value` ("reclassify all").
   * Without this, a class change only affects strokes drawn afterwards.
   */
  reclassifyAll(value: number) {
    this.undoStack.push(cloneRaster(this.raster))
    const d = this.raster.data
    for (let i = 0; i < d.length; i++) if (d[i] !== 0) d[i] = value
  }

  clear() {
    this.undoStack.push(cloneRaster(this.raster))
    this.raster.data.fill(0)
  }

  /** Live raster (mutable view; treat as read-only outside the layer). */
  current(): Raster {
    return this.raster
  }

  snapshot(): Raster {
    return cloneRaster(this.raster)
  }
}
