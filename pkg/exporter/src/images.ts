/**
 * Image directory listing and PNG decoding.
 *
 * A data directory whose immediate subdirectories contain images is treated
 * as labeled: subdirectory names sort lexicographically to class indices
 * 0..C-1 (the convention for ID exports). A flat directory of images is
 * unlabeled. Listing order is sorted, so exports are deterministic.
 */
import * as fs from 'node:fs'
import * as path from 'node:path'
import { PNG } from 'pngjs'

const IMAGE_EXTENSIONS = new Set(['.png'])

export interface ImageEntry {
  /** absolute path on disk */
  file: string
  /** sample id: path relative to the data root, posix separators */
  id: string
  label: number | null
}

export interface ImageListing {
  entries: ImageEntry[]
  classNames: string[]
}

function isImageFile(name: string): boolean {
  return IMAGE_EXTENSIONS.has(path.extname(name).toLowerCase())
}

export function listImages(root: string): ImageListing {
  if (!fs.existsSync(root) || !fs.statSync(root).isDirectory()) {
    throw new Error(`data directory not found: ${root}`)
  }
  const names = fs.readdirSync(root).sort()
  const subdirs = names.filter((n) => fs.statSync(path.join(root, n)).isDirectory())
  const labeled =
    subdirs.length > 0 &&
    subdirs.some((d) => fs.readdirSync(path.join(root, d)).some(isImageFile))

  const entries: ImageEntry[] = []
  if (labeled) {
    subdirs.forEach((dir, label) => {
      for (const name of fs.readdirSync(path.join(root, dir)).sort()) {
        if (isImageFile(name)) {
          entries.push({
            file: path.join(root, dir, name),
            id: `${dir}/${name}`,
            label,
          })
        }
      }
    })
    return { entries, classNames: subdirs }
  }
  for (const name of names) {
    if (isImageFile(name)) {
      entries.push({ file: path.join(root, name), id: name, label: null })
    }
  }
  return { entries, classNames: [] }
}

export interface DecodedImage {
  /** row-major [height, width, channels], values in [0, 1] */
  pixels: Float32Array
  height: number
  width: number
  channels: number
}

/**
 * Decode a PNG to float pixels in [0, 1] with the requested channel count
 * (3 keeps RGB, 1 averages the color channels). Alpha is dropped.
 */
export function decodeImage(file: string, channels: 1 | 3): DecodedImage {
  const png = PNG.sync.read(fs.readFileSync(file))
  const { width, height, data } = png
  const pixels = new Float32Array(width * height * channels)
  for (let i = 0; i < width * height; i++) {
    const r = data[4 * i] / 255
    const g = data[4 * i + 1] / 255
    const b = data[4 * i + 2] / 255
    if (channels === 3) {
      pixels[3 * i] = r
      pixels[3 * i + 1] = g
      pixels[3 * i + 2] = b
    } else {
      pixels[i] = (r + g + b) / 3
    }
  }
  return { pixels, height, width, channels }
}
