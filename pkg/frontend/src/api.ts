/** Typed client for the segmentation service. */

import { Raster } from './raster.js'
import { encodeGrayPng, decodeGrayPng, bytesToBase64, base64ToBytes } from './png.js'

export interface SegmentResult {
  mask: Raster
  prob: Raster
  inferenceMs: number
  modelId: string
}

export interface SampleSummary {
  id: string
  class_id: number
  class_name: string
}

export interface SampleDetail extends SampleSummary {
  image: Raster
  doodle: Raster
  mask: Raster
}

export interface ModelInfo {
  parameter_count: number
  model_id: string
  input_side: number
  class_names: string[]
}

export class ApiError extends Error {
  constructor(readonly status: number, detail: string) {
    super(`HTTP ${status}: ${detail}`)
  }
}

async function asJson(res: Response): Promise<any> {
  if (!res.ok) {
    let detail = res.statusText
    try {
      detail = (await res.json()).detail ?? detail
    } catch {
      /* non-JSON error body */
    }
    throw new ApiError(res.status, detail)
  }
  return res.json()
}

export class SegmentClient {
  constructor(
    readonly baseUrl: string,
    private readonly fetchFn: typeof fetch = fetch,
    readonly timeoutMs = 30_000,
  ) {}

  private async request(path: string, init?: RequestInit): Promise<any> {
    const controller = new AbortController()
    const timer = setTimeout(() => controller.abort(), this.timeoutMs)
    try {
      const res = await this.fetchFn(`${this.baseUrl}${path}`, {
        ...init,
        signal: controller.signal,
      })
      return await asJson(res)
    } finally {
      clearTimeout(timer)
    }
  }

  async health(): Promise<boolean> {
    const controller = new AbortController()
    const timer = setTimeout(() => controller.abort(), this.timeoutMs)
    try {
      const res = await this.fetchFn(`${this.baseUrl}/health`, { signal: controller.signal })
      return res.ok
    } finally {
      clearTimeout(timer)
    }
  }

  async modelInfo(): Promise<ModelInfo> {
    return this.request('/model/info')
  }

  async samples(): Promise<SampleSummary[]> {
    return this.request('/samples')
  }

  async sample(id: string): Promise<SampleDetail> {
    const raw = await this.request(`/samples/${id}`)
    return {
      ...raw,
      image: await decodeGrayPng(base64ToBytes(raw.image)),
      doodle: await decodeGrayPng(base64ToBytes(raw.doodle)),
      mask: await decodeGrayPng(base64ToBytes(raw.mask)),
    }
  }

  /** POST /segment; the server owns the class-value encoding of the doodle. */
  async segment(
    image: Raster,
    doodle: Raster,
    classId: number,
    threshold?: number,
  ): Promise<SegmentResult> {
    const body: Record<string, unknown> = {
      image: bytesToBase64(encodeGrayPng(image)),
      doodle: bytesToBase64(encodeGrayPng(doodle)),
      class_id: classId,
    }
    if (threshold !== undefined) body.threshold = threshold
    const raw = await this.request('/segment', {
      method: 'POST',
      headers: { 'content-type': 'application/json' },
      body: JSON.stringify(body),
    })
    return {
      mask: await decodeGrayPng(base64ToBytes(raw.mask)),
      prob: await decodeGrayPng(base64ToBytes(raw.prob)),
      inferenceMs: raw.inference_ms,
      modelId: raw.model_id,
    }
  }
}
