/**
 * Export engine: run every image in a directory through a pretrained
 * classifier and write logits (the model head) or penultimate-layer
 * features in the canonical CSV + manifest format.
 */
import * as tf from '@tensorflow/tfjs'
import * as fs from 'node:fs'
import * as path from 'node:path'

import { CsvWriter, writeManifest } from './csv.js'
import { decodeImage, listImages, type ImageEntry } from './images.js'
import { loadModel } from './modelio.js'

export interface ExportJob {
  /** model.json path, model directory, or http(s) URL into a model zoo */
  model: string
  /** image directory; class subdirectories mean labeled ID data */
  data: string
  columnKind: 'logits' | 'features'
  outCsv: string
  manifestPath: string
  batchSize?: number
  /** manifest kind; defaults to 'id' when the directory is labeled */
  datasetKind?: 'id' | 'ood'
  name?: string
  /** normalization applied after scaling pixels to [0, 1] */
  mean?: number
  std?: number
  /** unreadable images are listed here; defaults to `<outCsv>.skipped.txt` */
  skipLog?: string
}

export interface ExportResult {
  rows: number
  skipped: string[]
  numColumns: number
  numClasses: number
}

function inputGeometry(model: tf.LayersModel): {
  height: number
  width: number
  channels: 1 | 3
} {
  const shape = model.inputs[0].shape
  if (shape.length !== 4) {
    throw new Error(
      `expected an image model with input [batch, h, w, c], got shape [${shape}]`,
    )
  }
  const channels = shape[3]
  if (channels !== 1 && channels !== 3) {
    throw new Error(`unsupported channel count ${channels} (need 1 or 3)`)
  }
  return { height: shape[1] as number, width: shape[2] as number, channels }
}

function outputWidth(output: tf.SymbolicTensor): number {
  const shape = output.shape
  if (shape.length !== 2 || shape[1] === null) {
    throw new Error(`expected a flat [batch, d] output, got shape [${shape}]`)
  }
  return shape[1] as number
}

/** Model whose output is the penultimate layer's activation. */
export function featureModel(model: tf.LayersModel): tf.LayersModel {
  if (model.layers.length < 2) {
    throw new Error('model has no penultimate layer to hook')
  }
  const penultimate = model.layers[model.layers.length - 2]
  const output = penultimate.output
  if (Array.isArray(output)) {
    throw new Error('penultimate layer has multiple outputs; hook unavailable')
  }
  return tf.model({ inputs: model.inputs, outputs: output })
}

function preprocess(
  entry: ImageEntry,
  geometry: { height: number; width: number; channels: 1 | 3 },
  mean: number,
  std: number,
): tf.Tensor3D {
  const decoded = decodeImage(entry.file, geometry.channels)
  return tf.tidy(() => {
    let img = tf.tensor3d(
      decoded.pixels,
      [decoded.height, decoded.width, decoded.channels],
    )
    if (decoded.height !== geometry.height || decoded.width !== geometry.width) {
      img = tf.image.resizeBilinear(img, [geometry.height, geometry.width])
    }
    if (mean !== 0 || std !== 1) {
      img = img.sub(mean).div(std)
    }
    return img as tf.Tensor3D
  })
}

export async function runExport(job: ExportJob): Promise<ExportResult> {
  const batchSize = job.batchSize ?? 32
  const mean = job.mean ?? 0
  const std = job.std ?? 1
  if (std <= 0) throw new Error('std must be positive')
  if (batchSize < 1) throw new Error('batch size must be >= 1')

  const model = await loadModel(job.model)
  const geometry = inputGeometry(model)
  const head = outputWidth(model.outputs[0] as tf.SymbolicTensor)
  const scorer = job.columnKind === 'features' ? featureModel(model) : model
  const columns = outputWidth(scorer.outputs[0] as tf.SymbolicTensor)

  const { entries, classNames } = listImages(job.data)
  const labeled = classNames.length > 0
  const kind = job.datasetKind ?? (labeled ? 'id' : 'ood')
  const numClasses = labeled ? classNames.length : head
  if (job.columnKind === 'logits' && labeled && classNames.length > head) {
    throw new Error(
      `${classNames.length} class directories but the model head is ${head}-wide`,
    )
  }

  const writer = new CsvWriter(job.outCsv, columns)
  const skipped: string[] = []
  const batch: { entry: ImageEntry; tensor: tf.Tensor3D }[] = []

  const flush = () => {
    if (batch.length === 0) return
    const values = tf.tidy(() => {
      const stacked = tf.stack(batch.map((b) => b.tensor))
      return (scorer.predict(stacked, { batchSize: batch.length }) as tf.Tensor)
        .dataSync() as Float32Array
    })
    batch.forEach((b, i) => {
      writer.write({
        id: b.entry.id,
        label: kind === 'id' ? b.entry.label : null,
        values: values.subarray(i * columns, (i + 1) * columns),
      })
      b.tensor.dispose()
    })
    batch.length = 0
  }

  for (const entry of entries) {
    let tensor: tf.Tensor3D
    try {
      tensor = preprocess(entry, geometry, mean, std)
    } catch (err) {
      console.warn(`skipping unreadable image ${entry.file}: ${err}`)
      skipped.push(entry.id)
      continue
    }
    batch.push({ entry, tensor })
    if (batch.length >= batchSize) flush()
  }
  flush()
  const rows = writer.close()

  if (skipped.length > 0) {
    const logPath = job.skipLog ?? `${job.outCsv}.skipped.txt`
    fs.writeFileSync(logPath, skipped.join('\n') + '\n')
  }

  writeManifest(job.manifestPath, {
    name: job.name ?? path.basename(job.data),
    kind,
    num_classes: numClasses,
    column_kind: job.columnKind,
  })
  return { rows, skipped, numColumns: columns, numClasses }
}
