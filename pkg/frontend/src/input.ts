// Keyboard capture: arrows / WASD into a unit direction vector.

export class KeyInput {
  private down = new Set<string>();

  attach(target: {
    addEventListener(type: string, fn: (ev: KeyboardEvent) => void): void;
  }): void {
    target.addEventListener("keydown", (ev) => this.down.add(ev.key));
    target.addEventListener("keyup", (ev) => this.down.delete(ev.key));
  }

  direction(): [number, number] {
    let dx = 0;
    let dy = 0;
    if (this.down.has("ArrowLeft") || this.down.has("a")) dx -= 1;
    if (this.down.has("ArrowRight") || this.down.has("d")) dx += 1;
    if (this.down.has("ArrowUp") || this.down.has("w")) dy += 1;
    if (this.down.has("ArrowDown") || this.down.has("s")) dy -= 1;
    if (dx !== 0 && dy !== 0) {
      const inv = 1 / Math.sqrt(2);
      dx *= inv;
      dy *= inv;
    }
    return [dx, dy];
  }
}
