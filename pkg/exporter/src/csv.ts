/**
 * Writers for the canonical dataset contract consumed by the calibration
 * toolkit: a CSV with header `id,label,c0,...,c{N-1}` (empty label when
 * absent) and a JSON manifest. Floats are emitted with Number.toString,
 * which is the shortest round-trip decimal, so files reload bit-exactly.
 */
import * as fs from 'node:fs'

export interface Manifest {
  name: string
  kind: 'id' | 'ood'
  num_classes: number
  column_kind: 'logits' | 'features'
}

export interface CsvRow {
  id: string
  label: number | null
  values: ArrayLike<number>
}

export function formatRow(row: CsvRow): string {
  const label = row.label === null ? '' : String(row.label)
  const values = Array.from(row.values, (v) => Number(v).toString()).join(',')
  return `${row.id},${label},${values}`
}

export class CsvWriter {
  private readonly fd: number
  private readonly columns: number
  private rowsWritten = 0

  constructor(filePath: string, numColumns: number) {
    this.columns = numColumns
    this.fd = fs.openSync(filePath, 'w')
    const header = ['id', 'label']
    for (let i = 0; i < numColumns; i++) header.push(`c${i}`)
    fs.writeSync(this.fd, header.join(',') + '\n')
  }

  write(row: CsvRow): void {
    if (row.values.length !== this.columns) {
      throw new Error(
        `row ${row.id} has ${row.values.length} values, expected ${this.columns}`,
      )
    }
    if (row.id.includes(',') || row.id.includes('\n')) {
      throw new Error(`row id ${JSON.stringify(row.id)} contains a delimiter`)
    }
    fs.writeSync(this.fd, formatRow(row) + '\n')
    this.rowsWritten++
  }

  close(): number {
    fs.closeSync(this.fd)
    return this.rowsWritten
  }
}

export function writeManifest(filePath: string, manifest: Manifest): void {
  fs.writeFileSync(filePath, JSON.stringify(manifest, null, 2) + '\n')
}
