#@ pe: ReadRaDec
#@ kind: Producer
#@ output: output
from laminar import ProducerPE


class ReadRaDec(ProducerPE):
    """Reads galaxy coordinates (name, ra, dec) from a resources file."""

    def setup(self):
        path = self.resource_path(self.args.get("coordinates", "resources/coordinates.txt"))
        self.rows = []
        for line in path.read_text().splitlines():
            parts = line.split()
            if len(parts) >= 2:
                name = parts[2] if len(parts) > 2 else f"gal{len(self.rows)}"
                self.rows.append((name, float(parts[0]), float(parts[1])))
        self.i = 0

    def _process(self):
        if self.i >= len(self.rows):
            return None
        row = self.rows[self.i]
        self.i += 1
        return row
