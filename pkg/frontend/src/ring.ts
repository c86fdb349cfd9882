// Bounded drop-oldest buffer: the client-side mirror of the server's
// per-subscriber queue contract. Slow rendering must never grow memory;
// drops are counted, never silent.

export class RingBuffer<T> {
  private items: T[] = [];
  private _drops = 0;

  constructor(readonly capacity: number) {
    if (capacity < 1) throw new Error("capacity must be >= 1");
  }

  get length(): number {
    return this.items.length;
  }

  get drops(): number {
    return this._drops;
  }

  push(item: T): void {
    if (this.items.length >= this.capacity) {
      this.items.shift();
      this._drops += 1;
    }
    this.items.push(item);
  }

  /** Remove and return everything, oldest first. */
  drain(): T[] {
    const out = this.items;
    this.items = [];
    return out;
  }

  peekAll(): readonly T[] {
    return this.items;
  }

  clear(): void {
    this.items = [];
  }

  /** Drop leading items while pred holds (for time-window trimming). */
  dropWhile(pred: (item: T) => boolean): number {
    let n = 0;
    while (this.items.length > 0 && pred(this.items[0])) {
      this.items.shift();
      n += 1;
    }
    return n;
  }
}
