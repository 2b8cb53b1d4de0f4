/** Canvas session state: the doodle layer plus submission lifecycle.
 *
 * One request in flight at a time; submissions while pending are coalesced
 * (latest wins). A failed request leaves every piece of session state
 * untouched.
 */

import { DoodleLayer } from './doodle-layer.js'
import { SegmentClient, SegmentResult } from './api.js'
import { Raster } from './raster.js'
import { thresholdMask } from './overlay.js'

export interface ClassOption {
  id: number
  name: string
  color: { r: number; g: number; b: number }
}

/** Display value carried by stroke pixels for class `id` (dense, non-zero). */
export function strokeValue(id: number, numClasses: number): number {
  return Math.round((255 * (id + 1)) / Math.max(1, numClasses))
}

export type SessionListener = (event: 'response' | 'error' | 'stroke', detail?: string) => void

export class CanvasSession {
  readonly doodle: DoodleLayer
  classId: number
  brushRadius = 3
  overlayOpacity = 0.45
  threshold = 0.5
  eraserMode = false
  lastResponse: SegmentResult | null = null

  private image: Raster
  private pending = false
  private queued = false
  private listeners: SessionListener[] = []

  constructor(
    image: Raster,
    readonly classes: ClassOption[],
    private readonly client: SegmentClient,
  ) {
    this.image = image
    this.doodle = new DoodleLayer(image.width, image.height)
    this.classId = classes[0]?.id ?? 0
  }

  onEvent(fn: SessionListener) {
    this.listeners.push(fn)
  }

  private emit(event: 'response' | 'error' | 'stroke', detail?: string) {
    for (const fn of this.listeners) fn(event, detail)
  }

  baseImage(): Raster {
    return this.image
  }

  /** Replace the base image; doodle and response are stale, so reset them. */
  loadImage(image: Raster) {
    this.image = image
    const fresh = new DoodleLayer(image.width, image.height)
    // DoodleLayer is readonly on the session; swap internals wholesale
    Object.assign(this.doodle, fresh)
    this.lastResponse = null
  }

  currentStrokeValue(): number {
    return this.eraserMode ? 0 : strokeValue(this.classId, this.classes.length)
  }

  drawStroke(points: { x: number; y: number }[], radius = this.brushRadius) {
    this.doodle.drawStroke(points, radius, this.currentStrokeValue())
    this.emit('stroke')
  }

  undo(): boolean {
    return this.doodle.undo()
  }

  reclassifyAll() {
    this.doodle.reclassifyAll(strokeValue(this.classId, this.classes.length))
  }

  /** Mask at the current slider threshold, from the stored probability
   * raster; no network round trip. */
  thresholdedMask(): Raster | null {
    if (!this.lastResponse) return null
    return thresholdMask(this.lastResponse.prob, this.threshold)
  }

  get requestPending(): boolean {
    return this.pending
  }

  /** Submit the current (image, doodle, class) triple. Latest-wins while a
   * request is in flight. Resolves when this submission (or the coalesced
   * follow-up) has settled. */
  async submit(): Promise<void> {
    if (this.pending) {
      this.queued = true
      return
    }
    this.pending = true
    try {
      const result = await this.client.segment(
        this.image,
        this.doodle.snapshot(),
        this.classId,
        this.threshold,
      )
      this.lastResponse = result
      this.emit('response')
    } catch (err) {
      this.emit('error', err instanceof Error ? err.message : String(err))
    } finally {
      this.pending = false
      if (this.queued) {
        this.queued = false
        await this.submit()
      }
    }
  }
}
