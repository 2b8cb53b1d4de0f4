/** DOM wiring: canvas stack, pointer capture, controls. */

import { SegmentClient, SampleSummary } from './api.js'
import { CanvasSession, ClassOption, strokeValue } from './session.js'
import { Raster } from './raster.js'
import { tintedOverlay } from './overlay.js'

const CLASS_COLORS = [
  { r: 66, g: 135, b: 245 },
  { r: 240, g: 84, b: 84 },
  { r: 86, g: 196, b: 106 },
  { r: 230, g: 180, b: 60 },
]

const $ = <T extends HTMLElement>(id: string) => document.getElementById(id) as T

/** ImageData requires an ArrayBuffer-backed clamped array. */
function toImageData(rgba: Uint8ClampedArray, w: number, h: number): ImageData {
  const img = new ImageData(w, h)
  img.data.set(rgba)
  return img
}

function rasterToImageData(r: Raster): ImageData {
  const rgba = new Uint8ClampedArray(r.width * r.height * 4)
  for (let i = 0; i < r.data.length; i++) {
    rgba[i * 4] = rgba[i * 4 + 1] = rgba[i * 4 + 2] = r.data[i]
    rgba[i * 4 + 3] = 255
  }
  return toImageData(rgba, r.width, r.height)
}

class App {
  private client: SegmentClient
  private session: CanvasSession | null = null
  private classes: ClassOption[] = []
  private scale = 6

  constructor() {
    const base = (window as any).DOODLESEG_API ?? ''
    this.client = new SegmentClient(base)
  }

  async start() {
    const info = await this.client.modelInfo()
    this.classes = info.class_names.map((name, id) => ({
      id,
      name,
      color: CLASS_COLORS[id % CLASS_COLORS.length],
    }))
    const picker = $<HTMLSelectElement>('class-picker')
    picker.innerHTML = this.classes
      .map((c) => `<option value="${c.id}">${c.name}</option>`)
      .join('')
    $<HTMLSpanElement>('model-info').textContent =
      `${info.parameter_count.toLocaleString()} params, model ${info.model_id.slice(0, 8)}`

    const samples = await this.client.samples()
    const samplePicker = $<HTMLSelectElement>('sample-picker')
    samplePicker.innerHTML = samples
      .map((s: SampleSummary) => `<option value="${s.id}">${s.id}</option>`)
      .join('')
    this.bindControls()
    if (samples.length) await this.loadSample(samples[0].id)
  }

  private async loadSample(id: string) {
    const detail = await this.client.sample(id)
    this.session = new CanvasSession(detail.image, this.classes, this.client)
    this.session.classId = detail.class_id
    $<HTMLSelectElement>('class-picker').value = String(detail.class_id)
    this.session.onEvent((event, msg) => {
      if (event === 'error') this.toast(msg ?? 'request failed')
      this.render()
    })
    this.sizeCanvases(detail.image.width, detail.image.height)
    this.render()
  }

  private bindControls() {
    $<HTMLSelectElement>('sample-picker').addEventListener('change', (e) =>
      this.loadSample((e.target as HTMLSelectElement).value),
    )
    $<HTMLSelectElement>('class-picker').addEventListener('change', (e) => {
      if (this.session) this.session.classId = Number((e.target as HTMLSelectElement).value)
    })
    $<HTMLInputElement>('brush-radius').addEventListener('input', (e) => {
      if (this.session) this.session.brushRadius = Number((e.target as HTMLInputElement).value)
    })
    $<HTMLInputElement>('overlay-opacity').addEventListener('input', (e) => {
      if (this.session) {
        this.session.overlayOpacity = Number((e.target as HTMLInputElement).value)
        this.render()
      }
    })
    $<HTMLInputElement>('threshold').addEventListener('input', (e) => {
      if (this.session) {
        this.session.threshold = Number((e.target as HTMLInputElement).value)
        this.render() // re-binarize locally; no request
      }
    })
    $<HTMLInputElement>('eraser').addEventListener('change', (e) => {
      if (this.session) this.session.eraserMode = (e.target as HTMLInputElement).checked
    })
    $<HTMLButtonElement>('undo').addEventListener('click', () => {
      this.session?.undo()
      this.render()
    })
    $<HTMLButtonElement>('clear').addEventListener('click', () => {
      this.session?.doodle.clear()
      this.render()
    })
    $<HTMLButtonElement>('reclassify').addEventListener('click', () => {
      this.session?.reclassifyAll()
      this.render()
    })
    $<HTMLButtonElement>('submit').addEventListener('click', () => this.submit())
    this.bindPointer()
  }

  private bindPointer() {
    const canvas = $<HTMLCanvasElement>('draw-canvas')
    let stroke: { x: number; y: number }[] | null = null
    const toRaster = (ev: PointerEvent) => {
      const rect = canvas.getBoundingClientRect()
      return {
        x: ((ev.clientX - rect.left) / rect.width) * (this.session?.baseImage().width ?? 1),
        y: ((ev.clientY - rect.top) / rect.height) * (this.session?.baseImage().height ?? 1),
      }
    }
    canvas.addEventListener('pointerdown', (ev) => {
      canvas.setPointerCapture(ev.pointerId)
      stroke = [toRaster(ev)]
    })
    canvas.addEventListener('pointermove', (ev) => {
      if (stroke) stroke.push(toRaster(ev))
    })
    canvas.addEventListener('pointerup', () => {
      if (stroke && this.session) {
        this.session.drawStroke(stroke)
        this.render()
      }
      stroke = null
    })
  }

  private async submit() {
    if (!this.session) return
    $<HTMLButtonElement>('submit').disabled = true
    try {
      await this.session.submit()
      const r = this.session.lastResponse
      if (r) $<HTMLSpanElement>('latency').textContent = `${r.inferenceMs.toFixed(0)} ms`
    } finally {
      $<HTMLButtonElement>('submit').disabled = false
    }
  }

  private sizeCanvases(w: number, h: number) {
    for (const id of ['base-canvas', 'overlay-canvas', 'draw-canvas']) {
      const c = $<HTMLCanvasElement>(id)
      c.width = w
      c.height = h
      c.style.width = `${w * this.scale}px`
      c.style.height = `${h * this.scale}px`
    }
  }

  private render() {
    if (!this.session) return
    const image = this.session.baseImage()
    const baseCtx = $<HTMLCanvasElement>('base-canvas').getContext('2d')!
    baseCtx.putImageData(rasterToImageData(image), 0, 0)

    const overlayCtx = $<HTMLCanvasElement>('overlay-canvas').getContext('2d')!
    overlayCtx.clearRect(0, 0, image.width, image.height)
    const mask = this.session.thresholdedMask()
    if (mask) {
      const tint = this.classes[this.session.classId]?.color ?? CLASS_COLORS[0]
      const rgba = tintedOverlay(mask, tint, this.session.overlayOpacity)
      overlayCtx.putImageData(toImageData(rgba, mask.width, mask.height), 0, 0)
    }

    const drawCtx = $<HTMLCanvasElement>('draw-canvas').getContext('2d')!
    drawCtx.clearRect(0, 0, image.width, image.height)
    const doodle = this.session.doodle.current()
    const rgba = new Uint8ClampedArray(doodle.width * doodle.height * 4)
    for (let i = 0; i < doodle.data.length; i++) {
      if (doodle.data[i] !== 0) {
        const cls = this.classes.find(
          (c) => strokeValue(c.id, this.classes.length) === doodle.data[i],
        )
        const color = cls?.color ?? { r: 255, g: 255, b: 255 }
        rgba[i * 4] = color.r
        rgba[i * 4 + 1] = color.g
        rgba[i * 4 + 2] = color.b
        rgba[i * 4 + 3] = 230
      }
    }
    drawCtx.putImageData(toImageData(rgba, doodle.width, doodle.height), 0, 0)
  }

  private toast(message: string) {
    const el = $<HTMLDivElement>('toast')
    el.textContent = message
    el.classList.add('visible')
    setTimeout(() => el.classList.remove('visible'), 4000)
  }
}

new App().start().catch((err) => {
  document.body.insertAdjacentHTML(
    'beforeend',
    `<div class="toast visible">failed to reach the service: ${err}</div>`,
  )
})
