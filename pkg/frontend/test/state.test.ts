import { describe, expect, it } from 'vitest';

import { ChecklistState } from '../src/state.js';
import { makeTask } from './mock_server.js';

describe('ChecklistState', () => {
  it('starts with every toggle unset', () => {
    const state = new ChecklistState(makeTask('t1', ['three', 'pink', 'pigs']));
    expect(state.toggles).toEqual([null, null, null]);
    expect(state.quality).toBeNull();
    expect(state.complete).toBe(false);
  });

  it('is incomplete while any single answer is unset', () => {
    const task = makeTask('t1', ['a', 'b', 'c', 'd']);
    for (let unset = 0; unset < 5; unset += 1) {
      const state = new ChecklistState(task);
      for (let i = 0; i < 4; i += 1) {
        if (i !== unset) state.setToggle(i, true);
      }
      if (unset !== 4) state.setQuality(true);
      expect(state.complete).toBe(false);
      expect(() => state.buildSubmission('a1')).toThrow(/not every answer/);
    }
  });

  it('builds the exact submission body once complete', () => {
    const state = new ChecklistState(makeTask('t9', ['x', 'y', 'z']));
    state.setToggle(0, true);
    state.setToggle(1, false);
    state.setToggle(2, true);
    state.setQuality(false);
    expect(state.complete).toBe(true);
    expect(state.buildSubmission('ann-7')).toEqual({
      task_id: 't9',
      annotator_id: 'ann-7',
      quality: false,
      atom_labels: [true, false, true],
    });
  });

  it('lets answers be revised before submission', () => {
    const state = new ChecklistState(makeTask('t1', ['x']));
    state.setToggle(0, true);
    state.setToggle(0, false);
    state.setQuality(true);
    expect(state.buildSubmission('a').atom_labels).toEqual([false]);
  });

  it('legacy mode carries a single alignment answer', () => {
    const state = new ChecklistState(makeTask('t2', ['ignored'], 'legacy'));
    expect(state.toggles).toHaveLength(1);
    state.setToggle(0, true);
    state.setQuality(false);
    const body = state.buildSubmission('a1');
    expect(body.alignment).toBe(true);
    expect(body.atom_labels).toBeUndefined();
  });

  it('rejects out-of-range toggle indexes', () => {
    const state = new ChecklistState(makeTask('t1', ['x', 'y']));
    expect(() => state.setToggle(2, true)).toThrow(RangeError);
    expect(() => state.setToggle(-1, true)).toThrow(RangeError);
  });
});
