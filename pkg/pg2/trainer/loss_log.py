import csv
import logging
from pathlib import Path
from typing import Dict, List, Sequence, Union

logger = logging.getLogger(__name__)


class LossLog:
    """Append-only CSV of per-iteration losses with strictly increasing iterations.

    Reopening an existing log continues after its last row; rows for
    iterations already present (a resumed run replaying them) are skipped.
    """

    def __init__(self, path: Union[str, Path], columns: Sequence[str]):
        self.path = Path(path)
        self.columns = ["iteration"] + list(columns)
        self.last_iteration = 0
        if self.path.exists():
            rows = self.read(self.path)
            if rows:
                self.last_iteration = int(rows[-1]["iteration"])
        else:
            self.path.parent.mkdir(parents=True, exist_ok=True)
            with self.path.open("w", newline="") as f:
                csv.writer(f).writerow(self.columns)

    def append(self, iteration: int, values: Dict[str, float]) -> bool:
        if iteration <= self.last_iteration:
            logger.debug(f"Skipping logged iteration {iteration}")
            return False
        with self.path.open("a", newline="") as f:
            csv.writer(f).writerow([iteration] + [f"{values.get(c, float('nan')):.6g}" for c in self.columns[1:]])
        self.last_iteration = iteration
        return True

    @staticmethod
    def read(path: Union[str, Path]) -> List[Dict[str, str]]:
        with Path(path).open(newline="") as f:
            return list(csv.DictReader(f))
