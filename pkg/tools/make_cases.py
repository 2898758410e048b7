#!/usr/bin/env python3
"""Regenerate the bundled benchmark case files under src/rectse/data/.

ieee14 is the classic 14-bus test case with its solved voltage profile.
ieee57 and ieee118 are desk-scale reconstructions of the corresponding IEEE
systems: the topology, transformer taps and bus shunts follow the published
systems, while parameters and the truth voltage profile are filled in
deterministically where exact table values are not embedded here.
case2869 is a fully synthetic grid of PEGASE-2869 size used for scaling runs.

Run from the repo root after an editable install:  python tools/make_cases.py
"""

import math
import os
import sys

import numpy as np

sys.path.insert(0, os.path.join(os.path.dirname(__file__), "..", "src"))

from rectse.cases import Branch, Bus, NetworkCase, parse_case, serialize_case  # noqa: E402

DATA_DIR = os.path.join(os.path.dirname(__file__), "..", "src", "rectse", "data")

IEEE14_M = """\
function mpc = ieee14
% 14-bus test system with solved voltage profile.
mpc.version = '2';
mpc.baseMVA = 100;

%% bus data
%	bus_i	type	Pd	Qd	Gs	Bs	area	Vm	Va	baseKV	zone	Vmax	Vmin
mpc.bus = [
	1	3	0	0	0	0	1	1.060	0	0	1	1.06	0.94;
	2	2	21.7	12.7	0	0	1	1.045	-4.98	0	1	1.06	0.94;
	3	2	94.2	19.0	0	0	1	1.010	-12.72	0	1	1.06	0.94;
	4	1	47.8	-3.9	0	0	1	1.019	-10.33	0	1	1.06	0.94;
	5	1	7.6	1.6	0	0	1	1.020	-8.78	0	1	1.06	0.94;
	6	2	11.2	7.5	0	0	1	1.070	-14.22	0	1	1.06	0.94;
	7	1	0	0	0	0	1	1.062	-13.37	0	1	1.06	0.94;
	8	2	0	0	0	0	1	1.090	-13.36	0	1	1.06	0.94;
	9	1	29.5	16.6	0	19	1	1.056	-14.94	0	1	1.06	0.94;
	10	1	9.0	5.8	0	0	1	1.051	-15.10	0	1	1.06	0.94;
	11	1	3.5	1.8	0	0	1	1.057	-14.79	0	1	1.06	0.94;
	12	1	6.1	1.6	0	0	1	1.055	-15.07	0	1	1.06	0.94;
	13	1	13.5	5.8	0	0	1	1.050	-15.16	0	1	1.06	0.94;
	14	1	14.9	5.0	0	0	1	1.036	-16.04	0	1	1.06	0.94;
];

%% generator data
%	bus	Pg	Qg	Qmax	Qmin	Vg	mBase	status	Pmax	Pmin
mpc.gen = [
	1	232.4	-16.9	10	0	1.060	100	1	332.4	0;
	2	40	42.4	50	-40	1.045	100	1	140	0;
	3	0	23.4	40	0	1.010	100	1	100	0;
	6	0	12.2	24	-6	1.070	100	1	100	0;
	8	0	17.4	24	-6	1.090	100	1	100	0;
];

%% branch data
%	fbus	tbus	r	x	b	rateA	rateB	rateC	ratio	angle	status
mpc.branch = [
	1	2	0.01938	0.05917	0.0528	0	0	0	0	0	1;
	1	5	0.05403	0.22304	0.0492	0	0	0	0	0	1;
	2	3	0.04699	0.19797	0.0438	0	0	0	0	0	1;
	2	4	0.05811	0.17632	0.0340	0	0	0	0	0	1;
	2	5	0.05695	0.17388	0.0346	0	0	0	0	0	1;
	3	4	0.06701	0.17103	0.0128	0	0	0	0	0	1;
	4	5	0.01335	0.04211	0	0	0	0	0	0	1;
	4	7	0	0.20912	0	0	0	0	0.978	0	1;
	4	9	0	0.55618	0	0	0	0	0.969	0	1;
	5	6	0	0.25202	0	0	0	0	0.932	0	1;
	6	11	0.09498	0.19890	0	0	0	0	0	0	1;
	6	12	0.12291	0.25581	0	0	0	0	0	0	1;
	6	13	0.06615	0.13027	0	0	0	0	0	0	1;
	7	8	0	0.17615	0	0	0	0	0	0	1;
	7	9	0	0.11001	0	0	0	0	0	0	1;
	9	10	0.03181	0.08450	0	0	0	0	0	0	1;
	9	14	0.12711	0.27038	0	0	0	0	0	0	1;
	10	11	0.08205	0.19207	0	0	0	0	0	0	1;
	12	13	0.22092	0.19988	0	0	0	0	0	0	1;
	13	14	0.17093	0.34802	0	0	0	0	0	0	1;
];
"""

# 57-bus system: (from, to, r, x, b_total, tap)
IEEE57_BRANCHES = [
    (1, 2, 0.0083, 0.0280, 0.1290, 0), (2, 3, 0.0298, 0.0850, 0.0818, 0),
    (3, 4, 0.0112, 0.0366, 0.0380, 0), (4, 5, 0.0625, 0.1320, 0.0258, 0),
    (4, 6, 0.0430, 0.1480, 0.0348, 0), (6, 7, 0.0200, 0.1020, 0.0276, 0),
    (6, 8, 0.0339, 0.1730, 0.0470, 0), (8, 9, 0.0099, 0.0505, 0.0548, 0),
    (9, 10, 0.0369, 0.1679, 0.0440, 0), (9, 11, 0.0258, 0.0848, 0.0218, 0),
    (9, 12, 0.0648, 0.2950, 0.0772, 0), (9, 13, 0.0481, 0.1580, 0.0406, 0),
    (13, 14, 0.0132, 0.0434, 0.0110, 0), (13, 15, 0.0269, 0.0869, 0.0230, 0),
    (1, 15, 0.0178, 0.0910, 0.0988, 0), (1, 16, 0.0454, 0.2060, 0.0546, 0),
    (1, 17, 0.0238, 0.1080, 0.0286, 0), (3, 15, 0.0162, 0.0530, 0.0544, 0),
    (4, 18, 0.0, 0.5550, 0.0, 0.970), (4, 18, 0.0, 0.4300, 0.0, 0.978),
    (5, 6, 0.0302, 0.0641, 0.0124, 0), (7, 8, 0.0139, 0.0712, 0.0194, 0),
    (10, 12, 0.0277, 0.1262, 0.0328, 0), (11, 13, 0.0223, 0.0732, 0.0188, 0),
    (12, 13, 0.0178, 0.0580, 0.0604, 0), (12, 16, 0.0180, 0.0813, 0.0216, 0),
    (12, 17, 0.0397, 0.1790, 0.0476, 0), (14, 15, 0.0171, 0.0547, 0.0148, 0),
    (18, 19, 0.4610, 0.6850, 0.0, 0), (19, 20, 0.2830, 0.4340, 0.0, 0),
    (21, 20, 0.0, 0.7767, 0.0, 1.043), (21, 22, 0.0736, 0.1170, 0.0, 0),
    (22, 23, 0.0099, 0.0152, 0.0, 0), (23, 24, 0.1660, 0.2560, 0.0084, 0),
    (24, 25, 0.0, 1.1820, 0.0, 1.000), (24, 25, 0.0, 1.2300, 0.0, 1.000),
    (24, 26, 0.0, 0.0473, 0.0, 1.043), (26, 27, 0.1650, 0.2540, 0.0, 0),
    (27, 28, 0.0618, 0.0954, 0.0, 0), (28, 29, 0.0418, 0.0587, 0.0, 0),
    (7, 29, 0.0, 0.0648, 0.0, 0.967), (25, 30, 0.1350, 0.2020, 0.0, 0),
    (30, 31, 0.3260, 0.4970, 0.0, 0), (31, 32, 0.5070, 0.7550, 0.0, 0),
    (32, 33, 0.0392, 0.0360, 0.0, 0), (34, 32, 0.0, 0.9530, 0.0, 0.975),
    (34, 35, 0.0520, 0.0780, 0.0032, 0), (35, 36, 0.0430, 0.0537, 0.0016, 0),
    (36, 37, 0.0290, 0.0366, 0.0, 0), (37, 38, 0.0651, 0.1009, 0.0020, 0),
    (37, 39, 0.0239, 0.0379, 0.0, 0), (36, 40, 0.0300, 0.0466, 0.0, 0),
    (22, 38, 0.0192, 0.0295, 0.0, 0), (11, 41, 0.0, 0.7490, 0.0, 0.955),
    (41, 42, 0.2070, 0.3520, 0.0, 0), (41, 43, 0.0, 0.4120, 0.0, 0),
    (38, 44, 0.0289, 0.0585, 0.0020, 0), (15, 45, 0.0, 0.1042, 0.0, 0.955),
    (14, 46, 0.0, 0.0735, 0.0, 0.900), (46, 47, 0.0230, 0.0680, 0.0032, 0),
    (47, 48, 0.0182, 0.0233, 0.0, 0), (48, 49, 0.0834, 0.1290, 0.0048, 0),
    (49, 50, 0.0801, 0.1280, 0.0, 0), (50, 51, 0.1386, 0.2200, 0.0, 0),
    (10, 51, 0.0, 0.0712, 0.0, 0.930), (13, 49, 0.0, 0.1910, 0.0, 0.895),
    (29, 52, 0.1442, 0.1870, 0.0, 0), (52, 53, 0.0762, 0.0984, 0.0, 0),
    (53, 54, 0.1878, 0.2320, 0.0, 0), (54, 55, 0.1732, 0.2265, 0.0, 0),
    (11, 43, 0.0, 0.1530, 0.0, 0.958), (44, 45, 0.0624, 0.1242, 0.0040, 0),
    (40, 56, 0.0, 1.1950, 0.0, 0.958), (56, 41, 0.5530, 0.5490, 0.0, 0),
    (56, 42, 0.2125, 0.3540, 0.0, 0), (39, 57, 0.0, 1.3550, 0.0, 0.980),
    (57, 56, 0.1740, 0.2600, 0.0, 0), (38, 49, 0.1150, 0.1770, 0.0030, 0),
    (38, 48, 0.0312, 0.0482, 0.0, 0), (9, 55, 0.0, 0.1205, 0.0, 0.940),
]
IEEE57_SHUNTS = {18: 0.10, 25: 0.059, 53: 0.063}    # bs, per-unit

# 118-bus system: (from, to) topology; starred entries are transformers.
IEEE118_EDGES = """
1-2 1-3 4-5 3-5 5-6 6-7 8-9 8-5* 9-10 4-11 5-11 11-12 2-12 3-12 7-12 11-13
12-14 13-15 14-15 12-16 15-17 16-17 17-18 18-19 19-20 15-19 20-21 21-22 22-23
23-24 23-25 26-25* 25-27 27-28 28-29 30-17* 8-30 26-30 17-31 29-31 23-32 31-32
27-32 15-33 19-34 35-36 35-37 33-37 34-36 34-37 38-37* 37-39 37-40 30-38 39-40
40-41 40-42 41-42 43-44 34-43 44-45 45-46 46-47 46-48 47-49 42-49 42-49 45-49
48-49 49-50 49-51 51-52 52-53 53-54 49-54 49-54 54-55 54-56 55-56 56-57 50-57
56-58 51-58 54-59 56-59 56-59 55-59 59-60 59-61 60-61 60-62 61-62 63-59* 63-64
64-61 38-65 64-65 49-66 49-66 62-66 62-67 65-66* 66-67 65-68 47-69 49-69 68-69*
69-70 24-70 70-71 24-72 71-72 71-73 70-74 70-75 69-75 74-75 76-77 69-77 75-77
77-78 78-79 77-80 77-80 79-80 68-81 81-80* 77-82 82-83 83-84 83-85 84-85 85-86
86-87* 85-88 85-89 88-89 89-90 89-90 90-91 89-92 89-92 91-92 92-93 92-94 93-94
94-95 80-96 82-96 94-96 80-97 80-98 80-99 92-100 94-100 95-96 96-97 98-100
99-100 100-101 92-102 101-102 100-103 100-104 103-104 103-105 100-106 104-105
105-106 105-107 105-108 106-107 108-109 103-110 109-110 110-111 110-112 17-113
32-113 32-114 27-115 114-115 68-116* 12-117 75-118 76-118
"""
IEEE118_TAPS = {("8-5"): 0.985, ("26-25"): 0.960, ("30-17"): 0.960,
                ("38-37"): 0.935, ("63-59"): 0.960, ("65-66"): 0.935,
                ("68-69"): 0.935, ("81-80"): 0.935, ("86-87"): 1.000,
                ("68-116"): 1.000}
IEEE118_SHUNTS = {5: -0.40, 34: 0.14, 37: -0.25, 44: 0.10, 45: 0.10, 46: 0.10,
                  48: 0.15, 74: 0.12, 79: 0.20, 82: 0.20, 83: 0.10, 105: 0.20,
                  107: 0.06, 110: 0.06}


def _profile(branch_ends, n_buses, ref, rng, ang_step):
    """Smooth truth voltage profile: angles drop with graph distance from the
    reference, magnitudes jitter around 1 pu."""
    adj = {i: [] for i in range(1, n_buses + 1)}
    for f, t in branch_ends:
        adj[f].append(t)
        adj[t].append(f)
    depth = {ref: 0}
    frontier = [ref]
    while frontier:
        nxt = []
        for b in frontier:
            for o in adj[b]:
                if o not in depth:
                    depth[o] = depth[b] + 1
                    nxt.append(o)
        frontier = nxt
    missing = [b for b in range(1, n_buses + 1) if b not in depth]
    if missing:
        raise SystemExit(f"disconnected buses: {missing[:10]}")
    vm = 1.0 + rng.uniform(-0.02, 0.04, n_buses)
    va = np.array([-ang_step * depth[b] for b in range(1, n_buses + 1)])
    va += rng.uniform(-0.2, 0.2, n_buses)
    va -= va[ref - 1]
    return vm, va


def build_ieee57():
    rng = np.random.default_rng(57)
    ends = [(f, t) for f, t, *_ in IEEE57_BRANCHES]
    vm, va = _profile(ends, 57, 1, rng, 0.9)
    buses = tuple(Bus(id=i, v_true_mag=float(vm[i - 1]), v_true_ang=math.radians(float(va[i - 1])),
                      shunt_b=IEEE57_SHUNTS.get(i, 0.0)) for i in range(1, 58))
    branches = tuple(Branch(from_bus=f, to_bus=t, r=r, x=x, b_charging=b,
                            tap=tap if tap else 1.0)
                     for f, t, r, x, b, tap in IEEE57_BRANCHES)
    return NetworkCase(base_mva=100.0, reference_bus=1, buses=buses, branches=branches)


def build_ieee118():
    rng = np.random.default_rng(118)
    edges = []
    for tok in IEEE118_EDGES.split():
        star = tok.endswith("*")
        f, t = (int(v) for v in tok.rstrip("*").split("-"))
        edges.append((f, t, star, tok.rstrip("*")))
    vm, va = _profile([(f, t) for f, t, _, _ in edges], 118, 69, rng, 0.45)
    buses = tuple(Bus(id=i, v_true_mag=float(vm[i - 1]), v_true_ang=math.radians(float(va[i - 1])),
                      shunt_b=IEEE118_SHUNTS.get(i, 0.0)) for i in range(1, 119))
    branches = []
    for f, t, star, key in edges:
        if star:
            x = float(rng.uniform(0.02, 0.1))
            branches.append(Branch(from_bus=f, to_bus=t, r=0.0, x=x,
                                   tap=IEEE118_TAPS.get(key, 0.98)))
        else:
            x = float(rng.uniform(0.02, 0.20))
            r = x * float(rng.uniform(0.15, 0.35))
            b = float(rng.uniform(0.0, 0.08))
            branches.append(Branch(from_bus=f, to_bus=t, r=r, x=x, b_charging=b))
    return NetworkCase(base_mva=100.0, reference_bus=69,
                       buses=buses, branches=tuple(branches))


def build_case2869():
    n = 2869
    n_branches = 4582
    rng = np.random.default_rng(np.random.SeedSequence(2869))
    ends = []
    for j in range(2, n + 1):
        parent = int(rng.integers(max(1, j - 40), j))
        ends.append((parent, j))
    while len(ends) < n_branches:
        a = int(rng.integers(1, n))
        b = a + int(rng.integers(1, 60))
        if b > n:
            continue
        ends.append((a, b))
    vm, va = _profile(ends, n, 1, rng, 0.10)
    shunt_buses = rng.choice(np.arange(1, n + 1), size=120, replace=False)
    shunts = {int(b): float(rng.uniform(-0.2, 0.3)) for b in shunt_buses}
    buses = tuple(Bus(id=i, v_true_mag=float(vm[i - 1]), v_true_ang=math.radians(float(va[i - 1])),
                      shunt_b=shunts.get(i, 0.0)) for i in range(1, n + 1))
    branches = []
    for k, (f, t) in enumerate(ends):
        x = float(10.0 ** rng.uniform(-2.3, -0.7))
        if k % 50 == 17:     # sprinkle transformers, a few with phase shift
            tap = float(rng.uniform(0.95, 1.05))
            shift = math.radians(float(rng.uniform(-2.0, 2.0))) if k % 200 == 17 else 0.0
            branches.append(Branch(from_bus=f, to_bus=t, r=0.0, x=x,
                                   tap=tap, shift=shift))
        else:
            r = x * float(rng.uniform(0.1, 0.4))
            b = float(rng.uniform(0.0, 0.06))
            branches.append(Branch(from_bus=f, to_bus=t, r=r, x=x, b_charging=b))
    return NetworkCase(base_mva=100.0, reference_bus=1,
                       buses=buses, branches=tuple(branches))


def main():
    os.makedirs(DATA_DIR, exist_ok=True)
    with open(os.path.join(DATA_DIR, "ieee14.m"), "w") as fh:
        fh.write(IEEE14_M)
    cases = {
        "ieee14": parse_case(IEEE14_M),
        "ieee57": build_ieee57(),
        "ieee118": build_ieee118(),
        "case2869": build_case2869(),
    }
    for name, case in cases.items():
        text = serialize_case(case)
        reparsed = parse_case(text)     # sanity: schema round-trip
        assert reparsed.n_buses == case.n_buses
        path = os.path.join(DATA_DIR, f"{name}.json")
        with open(path, "w") as fh:
            fh.write(text)
        print(f"{name}: {case.n_buses} buses, {len(case.branches)} branches -> {path}")


if __name__ == "__main__":
    main()
