"""Short-term memory: the ordered (action, feedback) log of the current task."""

from __future__ import annotations

from dataclasses import dataclass, field

from expmem.errors import InvalidInput
from expmem.vlm.types import Action, FeedbackRecord


@dataclass(frozen=True)
class StmEntry:
    step: int
    action: Action
    feedback: FeedbackRecord


@dataclass
class StmLedger:
    """Pairs each planned action with the feedback computed after executing it.

    ``operator_notes`` holds human observations; a note's step is the number
    of entries logged when it was given, so it sits between actions.
    """

    entries: list[StmEntry] = field(default_factory=list)
    operator_notes: list[tuple[int, str]] = field(default_factory=list)

    def __len__(self) -> int:
        return len(self.entries)

    @property
    def next_step(self) -> int:
        return len(self.entries)

    def record(self, action: Action, feedback: FeedbackRecord) -> StmEntry:
        entry = StmEntry(self.next_step, action, feedback)
        self.entries.append(entry)
        return entry

    def add_note(self, text: str) -> None:
        if not text or not text.strip():
            raise InvalidInput("operator note must not be empty")
        self.operator_notes.append((self.next_step, text.strip()))

    def failure_texts(self) -> list[str]:
        """Failure causes and operator notes, oldest first."""
        texts = [e.feedback.failure_cause for e in self.entries if e.feedback.failed]
        texts.extend(text for _, text in self.operator_notes)
        return texts

    def render(self) -> str:
        """Text form used in prompts: one line per action/feedback pair or note."""
        notes = sorted(self.operator_notes)
        lines = []
        ni = 0
        for e in self.entries:
            while ni < len(notes) and notes[ni][0] <= e.step:
                lines.append(f"Observation from human: {notes[ni][1]}")
                ni += 1
            fb = e.feedback
            line = (
                f"At time step {e.step}, the robot executed {e.action.call_text()}"
                f" ({e.action.action_description or 'no description'}). "
                f"Action status: {fb.status}."
            )
            if fb.failure_cause:
                line += f" Failure cause: {fb.failure_cause}."
            if fb.next_step_suggestion:
                line += f" Suggestions for next action: {fb.next_step_suggestion}"
            lines.append(line)
        lines.extend(f"Observation from human: {text}" for _, text in notes[ni:])
        return "\n".join(lines) if lines else "(empty)"
