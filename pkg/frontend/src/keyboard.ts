import { SessionState } from "./state.js";
import { nudge, rotateSteps, scaleBy } from "./pose.js";

export interface KeyboardHooks {
  nextObject(): void;
  prevObject(): void;
  submit(): void;
  render(): void;
}

// The whole annotate loop is reachable without a pointer:
//   n / p        next / previous object
//   1..9         choose candidate N as best
//   shift+1..9   add candidate N to the ranking
//   arrows       nudge x/y, PageUp/PageDown raise/lower
//   [ / ]        rotate -5 / +5 degrees
//   - / =        shrink / grow
//   0            reset pose
//   Enter        submit (only when the gate is open)
export function bindKeyboard(
  target: EventTarget,
  state: SessionState,
  hooks: KeyboardHooks,
): (event: KeyboardEvent) => void {
  const handler = (event: KeyboardEvent) => {
    if (event.target instanceof HTMLInputElement) return;
    const key = event.key;
    if (key === "n") hooks.nextObject();
    else if (key === "p") hooks.prevObject();
    else if (key === "Enter") {
      if (state.submittable()) hooks.submit();
    } else if (/^[1-9]$/.test(key)) {
      const id = state.candidateOrder[Number(key) - 1];
      if (id !== undefined) {
        if (event.shiftKey) state.addAlternate(id);
        else state.chooseBest(id);
        hooks.render();
      }
    } else if (key === "!" || key === "@" || key === "#" || key === "$" || key === "%") {
      // Shifted digits on a US layout arrive as symbols.
      const id = state.candidateOrder["!@#$%".indexOf(key)];
      if (id !== undefined) {
        state.addAlternate(id);
        hooks.render();
      }
    } else if (key === "ArrowLeft") move(state, "x", -0.05);
    else if (key === "ArrowRight") move(state, "x", 0.05);
    else if (key === "ArrowUp") move(state, "y", 0.05);
    else if (key === "ArrowDown") move(state, "y", -0.05);
    else if (key === "PageUp") move(state, "z", 0.05);
    else if (key === "PageDown") move(state, "z", -0.05);
    else if (key === "[") state.applyPose(rotateSteps(state.pose, -1));
    else if (key === "]") state.applyPose(rotateSteps(state.pose, 1));
    else if (key === "-") state.applyPose(scaleBy(state.pose, 1 / 1.1).pose);
    else if (key === "=") state.applyPose(scaleBy(state.pose, 1.1).pose);
    else if (key === "0") state.resetPose();
    else return;
    hooks.render();
  };
  target.addEventListener("keydown", handler as EventListener);
  return handler;
}

function move(state: SessionState, axis: "x" | "y" | "z", delta: number): void {
  state.applyPose(nudge(state.pose, axis, delta).pose);
}
