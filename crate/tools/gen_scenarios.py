#!/usr/bin/env python3
"""Generate the five_way and roundabout scenario files (coordinates need trig)."""
import math
from pathlib import Path

OUT = Path(__file__).resolve().parent.parent / "crates" / "core" / "scenarios"


def fmt(v: float) -> str:
    return f"{round(v, 3):.3f}"


def node(nid: str, p) -> str:
    return f'  {{ id = "{nid}", x = {fmt(p[0])}, y = {fmt(p[1])} }},'


def edge(eid: str, a: str, b: str, via=None) -> str:
    if via:
        pts = ", ".join(f"[{fmt(x)}, {fmt(y)}]" for x, y in via)
        return f'  {{ id = "{eid}", from = "{a}", to = "{b}", via = [{pts}] }},'
    return f'  {{ id = "{eid}", from = "{a}", to = "{b}" }},'


def unit(deg: float):
    r = math.radians(deg)
    return (math.cos(r), math.sin(r))


def add(p, q, k=1.0):
    return (p[0] + k * q[0], p[1] + k * q[1])


def perp(u):
    return (-u[1], u[0])


def five_way(ablation: bool) -> str:
    arms = [unit(-90 + 72 * k) for k in range(5)]
    nodes, edges = [], []
    in_far, in_near, out_near, out_far = {}, {}, {}, {}
    for k, u in enumerate(arms):
        p = perp(u)
        in_far[k] = add(add((0, 0), u, 45), p, 1.75)
        in_near[k] = add(add((0, 0), u, 10), p, 1.75)
        out_near[k] = add(add((0, 0), u, 10), p, -1.75)
        out_far[k] = add(add((0, 0), u, 45), p, -1.75)
        nodes += [
            node(f"in{k}_far", in_far[k]),
            node(f"in{k}_near", in_near[k]),
            node(f"out{k}_near", out_near[k]),
            node(f"out{k}_far", out_far[k]),
        ]
        edges += [
            edge(f"in{k}", f"in{k}_far", f"in{k}_near"),
            edge(f"out{k}", f"out{k}_near", f"out{k}_far"),
        ]
    for a, b in [(0, 2), (1, 3), (4, 1)]:
        edges.append(edge(f"j{a}{b}", f"in{a}_near", f"out{b}_near"))
    # Return ring at radius 55 from the goal arm (2) back to the ego arm (0).
    ring = {}
    for k in (2, 3, 4, 0):
        ring[k] = add((0, 0), arms[k], 55)
        nodes.append(node(f"ring{k}", ring[k]))
    edges += [
        edge("ret_out", "out2_far", "ring2"),
        edge("ret_23", "ring2", "ring3"),
        edge("ret_34", "ring3", "ring4"),
        edge("ret_40", "ring4", "ring0"),
        edge("ret_in", "ring0", "in0_far"),
    ]

    anchors = []
    for i, s in enumerate([2.0, 6.0, 10.0, 14.0, 18.0, 22.0, 26.0, 30.0]):
        informative = "" if not ablation or i in (2, 6) else ", informative = false"
        anchors.append(f'  {{ edge = "in0", s = {fmt(s)}{informative} }},')

    name = "five_way_ablation" if ablation else "five_way"
    comment = (
        "# Five-way variant for the curriculum ablation: anchors 3 and 7 are\n"
        "# informative, the rest spawn no traffic and scramble the novelty input.\n"
        if ablation
        else "# Unsignalized five-way intersection: the ego crosses from arm 0 to\n"
        "# arm 2 through two non-yielding crossing streams.\n"
    )
    return f"""{comment}name = "{name}"
reward = "shared"

[limits]
t_forward = 150
t_reset = 900
v_max = 5.0
crawl_speed = 1.5
safe_distance = 2.5
tick = 0.2
a_max = 3.0
stuck_steps = 80

[lane_graph]
nodes = [
{chr(10).join(nodes)}
]
edges = [
{chr(10).join(edges)}
]

[anchors]
initial = [
{chr(10).join(anchors)}
]
goal = {{ edge = "out2", s = 25.0 }}

[traffic]
streams = [
  {{ edge = "in1", s = 0.0, route = ["in1", "j13", "out3"], speed = 5.0, period = 10.0, first = 0.0, speed_jitter = 0.08, prepopulate = true }},
  {{ edge = "in4", s = 0.0, route = ["in4", "j41", "out1"], speed = 5.0, period = 12.0, first = 4.0, speed_jitter = 0.08, prepopulate = true }},
]
"""


def roundabout() -> str:
    r = 12.0
    nodes, edges = [], []
    ring_pt = {a: (r * math.cos(math.radians(a)), r * math.sin(math.radians(a))) for a in range(0, 360, 45)}
    for a, p in ring_pt.items():
        nodes.append(node(f"ring{a}", p))
    for a in range(0, 360, 45):
        b = (a + 45) % 360
        via = [
            (r * math.cos(math.radians(a + 15)), r * math.sin(math.radians(a + 15))),
            (r * math.cos(math.radians(a + 30)), r * math.sin(math.radians(a + 30))),
        ]
        edges.append(edge(f"ring{a}", f"ring{a}", f"ring{b}", via))
    nodes += [
        node("s_in", (1.75, -45.0)),
        node("s_gate", (1.75, -16.0)),
        node("e_gate", (16.0, -1.75)),
        node("e_out", (45.0, -1.75)),
        node("n_in", (-1.75, 45.0)),
        node("n_gate", (-1.75, 16.0)),
        node("w_gate", (-16.0, 1.75)),
        node("w_out", (-45.0, 1.75)),
        node("rr1", (55.0, -55.0)),
        node("rr2", (1.75, -55.0)),
    ]
    edges += [
        edge("in_s", "s_in", "s_gate"),
        edge("e_s", "s_gate", "ring270"),
        edge("x_e", "ring0", "e_gate"),
        edge("out_e", "e_gate", "e_out"),
        edge("in_n", "n_in", "n_gate"),
        edge("e_n", "n_gate", "ring90"),
        edge("x_w", "ring180", "w_gate"),
        edge("out_w", "w_gate", "w_out"),
        edge("ret1", "e_out", "rr1"),
        edge("ret2", "rr1", "rr2"),
        edge("ret3", "rr2", "s_in"),
    ]
    return f"""# Roundabout: the ego enters from the south, yields to circulating traffic,
# rides a quarter of the ring and exits east. The circulating stream enters
# from the north and sweeps three quarters of the ring before exiting east.
name = "roundabout"
reward = "shared"

[limits]
t_forward = 200
t_reset = 900
v_max = 5.0
crawl_speed = 1.5
safe_distance = 2.5
tick = 0.2
a_max = 3.0
stuck_steps = 80

[lane_graph]
nodes = [
{chr(10).join(nodes)}
]
edges = [
{chr(10).join(edges)}
]

[anchors]
initial = [
  {{ edge = "in_s", s = 2.0 }},
  {{ edge = "in_s", s = 9.0 }},
  {{ edge = "in_s", s = 16.0 }},
  {{ edge = "in_s", s = 23.0 }},
]
goal = {{ edge = "out_e", s = 20.0 }}

[traffic]
streams = [
  {{ edge = "in_n", s = 0.0, route = ["in_n", "e_n", "ring90", "ring135", "ring180", "ring225", "ring270", "ring315", "x_e", "out_e"], speed = 4.0, period = 12.0, first = 0.0, speed_jitter = 0.05, prepopulate = true }},
]
"""


def main():
    OUT.mkdir(parents=True, exist_ok=True)
    (OUT / "five_way.toml").write_text(five_way(ablation=False))
    (OUT / "five_way_ablation.toml").write_text(five_way(ablation=True))
    (OUT / "roundabout.toml").write_text(roundabout())
    print("wrote", OUT)


if __name__ == "__main__":
    main()
