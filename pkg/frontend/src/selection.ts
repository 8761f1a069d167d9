// Plane selection for room creation: an ordered set of at most four ids.

export const MAX_SELECTED = 4;

export type ToggleResult = "added" | "removed" | "rejected";

export class Selection {
  ids: number[] = [];

  toggle(planeId: number): ToggleResult {
    const at = this.ids.indexOf(planeId);
    if (at >= 0) {
      this.ids.splice(at, 1);
      return "removed";
    }
    if (this.ids.length >= MAX_SELECTED) {
      return "rejected";
    }
    this.ids.push(planeId);
    return "added";
  }

  has(planeId: number): boolean {
    return this.ids.includes(planeId);
  }

  get complete(): boolean {
    return this.ids.length === MAX_SELECTED;
  }

  clear(): void {
    this.ids = [];
  }

  /** Drop selected planes that no longer exist in the graph. */
  prune(exists: (id: number) => boolean): void {
    this.ids = this.ids.filter(exists);
  }
}
