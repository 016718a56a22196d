"""Regenerates the bundled 3-zone fixture CSVs (deterministic)."""
import csv
import math
import pathlib

HERE = pathlib.Path(__file__).parent

NODES = [("N1", "Z1", 1), ("N2", "Z1", 0), ("N3", "Z2", 0),
         ("N4", "Z2", 0), ("N5", "Z2", 0), ("N6", "Z3", 0)]
LINES = [("L12", "N1", "N2", 0.10, 300), ("L23", "N2", "N3", 0.10, 200),
         ("L34", "N3", "N4", 0.10, 250), ("L45", "N4", "N5", 0.10, 250),
         ("L56", "N5", "N6", 0.10, 200), ("L61", "N6", "N1", 0.10, 200),
         ("L35", "N3", "N5", 0.15, 100)]
GENS = [("G1", "N1", "dispatchable", 400, 45), ("G2", "N2", "dispatchable", 200, 40),
        ("G3", "N3", "dispatchable", 150, 30), ("G4", "N5", "dispatchable", 400, 15),
        ("G5", "N4", "dispatchable", 150, 35), ("G6", "N6", "dispatchable", 150, 32),
        ("W1", "N6", "intermittent", 350, 0), ("W2", "N4", "intermittent", 150, 0)]
BASE_DEMAND = {"N1": 220, "N2": 120, "N3": 200, "N4": 60, "N5": 40, "N6": 60}
HOURS = 24


def load_profile(h):
    return 0.8 + 0.2 * math.sin(math.pi * (h - 7) / 12)


def wind_profile(h, phase):
    return 0.5 + 0.3 * math.cos(math.pi * (h + phase) / 12)


def write(name, header, rows):
    with open(HERE / name, "w", newline="") as f:
        w = csv.writer(f, lineterminator="\n")
        w.writerow(header)
        w.writerows(rows)


def main():
    write("nodes.csv", ["node_id", "zone_id", "slack"], NODES)
    write("lines.csv", ["line_id", "from", "to", "reactance_pu", "capacity_mw"], LINES)
    write("generators.csv", ["gen_id", "node_id", "kind", "capacity_mw", "cost_per_mwh"], GENS)
    demand, avail = [], []
    for h in range(HOURS):
        ts = f"t{h + 1:02d}"
        for node, base in BASE_DEMAND.items():
            demand.append((ts, node, round(base * load_profile(h), 1)))
        avail.append((ts, "W1", round(350 * wind_profile(h, 0), 1)))
        avail.append((ts, "W2", round(150 * wind_profile(h, 6), 1)))
    write("demand.csv", ["timestep", "node_id", "mw"], demand)
    write("availability.csv", ["timestep", "gen_id", "mw"], avail)


if __name__ == "__main__":
    main()
