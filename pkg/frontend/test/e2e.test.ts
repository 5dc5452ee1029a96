// @vitest-environment jsdom
//
// Full round trip against the real annotation server: fixture benchmark
// and images are generated by the Python package, the server is spawned
// as a subprocess, and the UI talks to it over real HTTP.
import { type ChildProcess, execFileSync, spawn } from 'node:child_process';
import { existsSync, mkdtempSync, readFileSync, rmSync } from 'node:fs';
import { tmpdir } from 'node:os';
import { join } from 'node:path';
import { afterAll, beforeAll, describe, expect, it } from 'vitest';

import { ApiClient } from '../src/api.js';
import { mountApp } from '../src/app.js';
import { Session } from '../src/session.js';
import type { NextTaskResponse, SubmitResponse } from '../src/types.js';

const realFetch: typeof fetch = globalThis.fetch.bind(globalThis);

const FIXTURE_SCRIPT = `
import base64, sys
from pathlib import Path
from atomeval.grammar import sample_prompt, save_benchmark
from atomeval.vocabulary import load_vocabulary

out = Path(sys.argv[1])
out.mkdir(parents=True, exist_ok=True)
vocab = load_vocabulary()
prompts = [sample_prompt(5, seed=500 + i, vocab=vocab, prompt_id=f"05-ui{i}")
           for i in range(5)]
save_benchmark(prompts, out / "benchmark.jsonl")
png = base64.b64decode(
    "iVBORw0KGgoAAAANSUhEUgAAAAEAAAABCAYAAAAfFcSJAAAADUlEQVR42mP8"
    "z8BQDwAEhQGAhKmMIQAAAABJRU5ErkJggg==")
images = out / "images"
images.mkdir(exist_ok=True)
for p in prompts:
    (images / f"{p.id}.png").write_bytes(png + p.id.encode())
`;

interface ServerHandle {
  base: string;
  store: string;
  process: ChildProcess;
}

async function startServer(dir: string, port: number, annotatorsPerImage: number,
): Promise<ServerHandle> {
  execFileSync('python3', ['-c', FIXTURE_SCRIPT, dir]);
  const store = join(dir, 'annotations.jsonl');
  const child = spawn('python3', [
    '-m', 'atomeval', 'serve',
    '--benchmark', join(dir, 'benchmark.jsonl'),
    '--images', join(dir, 'images'),
    '--store', store,
    '--model-id', 'ui-model',
    '--annotators-per-image', String(annotatorsPerImage),
    '--host', '127.0.0.1',
    '--port', String(port),
  ], { stdio: 'ignore' });
  const base = `http://127.0.0.1:${port}`;
  for (let attempt = 0; attempt < 100; attempt += 1) {
    try {
      const response = await realFetch(`${base}/api/progress`);
      if (response.ok) return { base, store, process: child };
    } catch {
      // not up yet
    }
    await new Promise((r) => setTimeout(r, 250));
  }
  child.kill('SIGKILL');
  throw new Error('annotation server did not come up');
}

function storedRecords(store: string): Array<Record<string, unknown>> {
  if (!existsSync(store)) return [];
  const text = readFileSync(store, 'utf-8').trim();
  if (!text) return [];
  return text.split('\n').map((line) => JSON.parse(line) as Record<string, unknown>);
}

async function waitForRecords(store: string, count: number,
): Promise<Array<Record<string, unknown>>> {
  for (let i = 0; i < 200; i += 1) {
    const records = storedRecords(store);
    if (records.length >= count) return records;
    await new Promise((r) => setTimeout(r, 25));
  }
  throw new Error(`store never reached ${count} records`);
}

function q<T extends HTMLElement>(testId: string): T {
  const node = document.querySelector<T>(`[data-testid="${testId}"]`);
  if (!node) throw new Error(`missing [data-testid=${testId}]`);
  return node;
}

function qa(testId: string): HTMLElement[] {
  return Array.from(document.querySelectorAll(`[data-testid="${testId}"]`));
}

async function settled(session: Session): Promise<void> {
  for (let i = 0; i < 100 && session.phase === 'loading'; i += 1) {
    await new Promise((r) => setTimeout(r, 25));
  }
}

async function waitFor(condition: () => boolean, what: string): Promise<void> {
  for (let i = 0; i < 200; i += 1) {
    if (condition()) return;
    await new Promise((r) => setTimeout(r, 25));
  }
  throw new Error(`timed out waiting for ${what}`);
}

describe('against the real annotation server', () => {
  const basePort = 9000 + Math.floor(Math.random() * 20000);
  const dirs: string[] = [];
  const servers: ServerHandle[] = [];

  afterAll(() => {
    for (const server of servers) server.process.kill('SIGKILL');
    for (const dir of dirs) rmSync(dir, { recursive: true, force: true });
  });

  async function launch(annotatorsPerImage: number): Promise<ServerHandle> {
    const dir = mkdtempSync(join(tmpdir(), 'atomeval-ui-'));
    dirs.push(dir);
    const server = await startServer(dir, basePort + servers.length, annotatorsPerImage);
    servers.push(server);
    return server;
  }

  it('browser session round-trips an atomicity-5 checklist', { timeout: 60_000 }, async () => {
    const server = await launch(1);
    const root = document.createElement('div');
    document.body.replaceChildren(root);
    const session = new Session(new ApiClient(server.base, realFetch), 'ui-annotator');
    mountApp(root, session);
    await session.start();
    await settled(session);

    // the atomicity-5 task renders exactly five checklist toggles
    expect(session.phase).toBe('annotating');
    const rows = qa('atom-row');
    expect(rows).toHaveLength(5);
    expect(q('prompt-text').textContent).toBe(session.view!.task.prompt_text);

    // the served image is the fixture PNG
    const image = await realFetch(`${server.base}${session.view!.task.image_url}`);
    expect(image.status).toBe(200);
    const bytes = new Uint8Array(await image.arrayBuffer());
    expect(Array.from(bytes.slice(0, 4))).toEqual([137, 80, 78, 71]);

    // submission with any unset toggle is impossible
    const pattern = [true, false, true, true, false];
    pattern.forEach((value, index) => {
      expect(q<HTMLButtonElement>('submit').disabled).toBe(true);
      const button = rows[index]!.querySelector<HTMLButtonElement>(
        `[data-testid="atom-row-${value ? 'yes' : 'no'}"]`)!;
      button.click();
    });
    expect(q<HTMLButtonElement>('submit').disabled).toBe(true); // quality unset
    await expect(session.submit()).rejects.toThrow(/not every answer/);
    q<HTMLButtonElement>('quality-row-yes').click();
    expect(q<HTMLButtonElement>('submit').disabled).toBe(false);

    const expectedTask = session.view!.task.task_id;
    const expectedPrompt = session.view!.task.prompt_id;
    q<HTMLButtonElement>('submit').click();

    // the stored record is exactly what the UI submitted
    const records = await waitForRecords(server.store, 1);
    await waitFor(() => session.progress?.completed === 1 && session.phase !== 'loading',
      'the session to refresh after submit');
    expect(records).toHaveLength(1);
    expect(records[0]).toMatchObject({
      prompt_id: expectedPrompt,
      model_id: 'ui-model',
      rewritten: false,
      annotator_id: 'ui-annotator',
      quality: true,
      atom_labels: pattern,
    });
    expect(expectedTask).toContain(expectedPrompt);
    expect(q('progress').textContent).toContain('1 / 5');
  });

  it('two interleaved annotators never share a per-annotator task', { timeout: 60_000 }, async () => {
    const server = await launch(2);
    const api = new ApiClient(server.base, realFetch);
    const served: Record<string, string[]> = { a1: [], a2: [] };

    for (let round = 0; round < 5; round += 1) {
      for (const annotator of ['a1', 'a2'] as const) {
        const next: NextTaskResponse = await api.nextTask(annotator);
        expect(next.done).toBe(false);
        const task = next.task!;
        served[annotator]!.push(task.task_id);
        const response: SubmitResponse = await api.submit({
          task_id: task.task_id,
          annotator_id: annotator,
          quality: true,
          atom_labels: task.atoms.map((_, i) => i % 2 === 0),
        });
        expect(response.ok).toBe(true);
      }
    }

    for (const annotator of ['a1', 'a2']) {
      expect(new Set(served[annotator]!).size).toBe(5);
      const after = await api.nextTask(annotator);
      expect(after.done).toBe(true);
    }
    const progress = await api.progress();
    expect(progress.total).toBe(5);
    expect(progress.completed).toBe(5);
    expect(progress.per_annotator).toEqual({ a1: 5, a2: 5 });
    expect(storedRecords(server.store)).toHaveLength(10);
  });
});
