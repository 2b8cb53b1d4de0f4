import { describe, it, expect } from 'vitest'

import { DoodleLayer } from '../src/doodle-layer.js'
import { rastersEqual, nonZeroCount } from '../src/raster.js'
import { strokeValue } from '../src/session.js'

describe('DoodleLayer undo', () => {
  it('restores the exact prior raster byte for byte', () => {
    const layer = new DoodleLayer(32, 32)
    layer.drawStroke([{ x: 5, y: 5 }, { x: 20, y: 17 }], 2, 85)
    const before = layer.snapshot()
    layer.drawStroke([{ x: 10, y: 25 }, { x: 28, y: 3 }], 3, 170)
    expect(rastersEqual(layer.current(), before)).toBe(false)
    expect(layer.undo()).toBe(true)
    expect(rastersEqual(layer.current(), before)).toBe(true)
  })

  it('undo on an empty stack reports false', () => {
    const layer = new DoodleLayer(8, 8)
    expect(layer.undo()).toBe(false)
  })

  it('stacks multiple undos back to blank', () => {
    const layer = new DoodleLayer(16, 16)
    for (let i = 0; i < 4; i++) layer.drawStroke([{ x: i * 3 + 1, y: 8 }], 1, 200)
    expect(layer.undoDepth).toBe(4)
    while (layer.undo()) { /* unwind */ }
    expect(nonZeroCount(layer.current())).toBe(0)
  })
})

describe('class value semantics', () => {
  it('non-zero pixels carry only stroke values that were drawn', () => {
    const layer = new DoodleLayer(32, 32)
    const v0 = strokeValue(0, 3)
    const v1 = strokeValue(1, 3)
    layer.drawStroke([{ x: 4, y: 4 }, { x: 12, y: 4 }], 1, v0)
    layer.drawStroke([{ x: 4, y: 20 }, { x: 12, y: 20 }], 1, v1)
    const values = new Set(Array.from(layer.current().data).filter((v) => v !== 0))
    expect(values).toEqual(new Set([v0, v1]))
  })

  it('changing class affects later strokes only, until reclassifyAll', () => {
    const layer = new DoodleLayer(32, 32)
    const v0 = strokeValue(0, 3)
    const v2 = strokeValue(2, 3)
    layer.drawStroke([{ x: 4, y: 4 }], 2, v0)
    layer.drawStroke([{ x: 20, y: 20 }], 2, v2) // class switched in the UI
    const data = layer.current().data
    expect(data[4 * 32 + 4]).toBe(v0)
    expect(data[20 * 32 + 20]).toBe(v2)

    layer.reclassifyAll(v2)
    const after = new Set(Array.from(layer.current().data).filter((v) => v !== 0))
    expect(after).toEqual(new Set([v2]))
  })

  it('reclassifyAll is undoable', () => {
    const layer = new DoodleLayer(16, 16)
    layer.drawStroke([{ x: 8, y: 8 }], 2, 85)
    const before = layer.snapshot()
    layer.reclassifyAll(255)
    layer.undo()
    expect(rastersEqual(layer.current(), before)).toBe(true)
  })

  it('eraser zeroes affected pixels only', () => {
    const layer = new DoodleLayer(32, 32)
    layer.drawStroke([{ x: 8, y: 8 }], 3, 85)
    layer.drawStroke([{ x: 24, y: 24 }], 3, 85)
    const countBefore = nonZeroCount(layer.current())
    layer.erase([{ x: 8, y: 8 }], 4)
    const data = layer.current().data
    expect(data[8 * 32 + 8]).toBe(0)
    expect(data[24 * 32 + 24]).toBe(85)
    expect(nonZeroCount(layer.current())).toBeLessThan(countBefore)
  })
})
