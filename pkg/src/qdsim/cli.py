"""Command-line front end.

Subcommands: ``simulate`` (one device -> one map file), ``ensemble`` (N
sampled devices + manifest), ``patches`` (training patches from map files),
``plot`` (render the four channel maps as images), and ``validate`` (run
the property audits on stored maps). All randomness flows from --seed and
``--workers`` never changes output bytes. The QDSIM_CONFIG environment
variable supplies a default device configuration file.
"""

from __future__ import annotations

import argparse
import os
import sys

from . import dataset
from .audits import audit_map
from .device import DeviceError, DeviceSpec, load_device_config, mean_device, sample_device
from .solver import SolverConfig

CONFIG_ENV = "QDSIM_CONFIG"

#: display rescaling applied to the current channel at render time only
CURRENT_PLOT_SCALE = 1e4


def _base_device(args) -> DeviceSpec:
    config_path = args.config or os.environ.get(CONFIG_ENV)
    if config_path:
        return load_device_config(config_path)
    return mean_device()


def cmd_simulate(args) -> int:
    device = _base_device(args)
    if args.seed is not None:
        device = sample_device(device, args.seed)
    device_map = dataset.sweep_map(device, grid_size=args.grid,
                                   config=SolverConfig(),
                                   workers=args.workers)
    dataset.save_map(device_map, args.out)
    print(f"wrote {args.out} ({args.grid}x{args.grid} map, "
          f"{len(device_map.diagnostics)} diagnostics)")
    return 0


def cmd_ensemble(args) -> int:
    device = _base_device(args)
    manifest = dataset.generate_ensemble(device, count=args.count, seed=args.seed,
                                         output_dir=args.out, grid_size=args.grid,
                                         config=SolverConfig(),
                                         workers=args.workers)
    print(f"wrote {len(manifest['entries'])} maps + manifest to {args.out}")
    return 0


def cmd_patches(args) -> int:
    map_paths = []
    for item in args.inputs:
        if os.path.isdir(item):
            names = sorted(n for n in os.listdir(item)
                           if n.startswith("device_") and n.endswith(".json"))
            map_paths.extend(os.path.join(item, n) for n in names)
        else:
            map_paths.append(item)
    if not map_paths:
        raise DeviceError("no input map files found")
    patches = []
    for index, path in enumerate(map_paths):
        device_map = dataset.load_map(path)
        patches.extend(dataset.sample_patches(
            device_map, channel=args.channel, size=args.patch_size,
            count=args.patches_per_device,
            seed=dataset.device_seed(args.seed, index)))
    dataset.save_patches(patches, channel=args.channel, seed=args.seed,
                         path=args.out,
                         source=[os.path.basename(p) for p in map_paths])
    print(f"wrote {len(patches)} {args.channel} patches "
          f"({args.patch_size}x{args.patch_size}) to {args.out}")
    return 0


def cmd_plot(args) -> int:
    import matplotlib
    matplotlib.use("Agg")
    import matplotlib.pyplot as plt

    device_map = dataset.load_map(args.input)
    os.makedirs(args.out, exist_ok=True)
    extent = (device_map.v_p1[0], device_map.v_p1[-1],
              device_map.v_p2[0], device_map.v_p2[-1])
    channels = {
        "current": (device_map.current_map() * CURRENT_PLOT_SCALE,
                    f"current (x{CURRENT_PLOT_SCALE:.0e})"),
        "charge": (device_map.charge_map(), "total charge (electrons)"),
        "sensor": (device_map.sensor_map(0), "sensor 1 conductance"),
        "state": (device_map.state_map(), "state label"),
    }
    written = []
    for name, (data, label) in channels.items():
        fig, ax = plt.subplots(figsize=(5, 4))
        im = ax.imshow(data.T, origin="lower", extent=extent, aspect="auto",
                       cmap="viridis")
        ax.set_xlabel("V_P1 (mV)")
        ax.set_ylabel("V_P2 (mV)")
        ax.set_title(label)
        fig.colorbar(im, ax=ax)
        path = os.path.join(args.out, f"{name}.png")
        fig.savefig(path, dpi=150, bbox_inches="tight")
        plt.close(fig)
        written.append(path)
    print("wrote " + ", ".join(written))
    return 0


def cmd_validate(args) -> int:
    failures = 0
    for path in args.inputs:
        device_map = dataset.load_map(path)
        print(f"{path}:")
        for name, ok, detail in audit_map(device_map):
            print(f"  [{'PASS' if ok else 'FAIL'}] {name}: {detail}")
            failures += 0 if ok else 1
    return 0 if failures == 0 else 1


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="qdsim",
        description="simulate gate-defined quantum-dot devices and build "
                    "labeled training data")
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p, seed_default=None):
        p.add_argument("--config", help=f"device configuration file "
                       f"(default: ${CONFIG_ENV} if set)")
        p.add_argument("--seed", type=int, default=seed_default)
        p.add_argument("--workers", type=int, default=1)

    p = sub.add_parser("simulate", help="sweep one device into a map file")
    common(p)
    p.add_argument("--grid", type=int, default=dataset.DEFAULT_GRID)
    p.add_argument("--out", default="device_map.json")
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("ensemble", help="sample and sweep N devices")
    common(p, seed_default=0)
    p.add_argument("--count", type=int, default=10)
    p.add_argument("--grid", type=int, default=dataset.DEFAULT_GRID)
    p.add_argument("--out", default="ensemble")
    p.set_defaults(func=cmd_ensemble)

    p = sub.add_parser("patches", help="sample labeled patches from map files")
    p.add_argument("inputs", nargs="+", help="map files or ensemble directories")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--channel", choices=("current", "sensor"), default="current")
    p.add_argument("--patch-size", type=int, default=dataset.DEFAULT_PATCH_SIZE)
    p.add_argument("--patches-per-device", type=int,
                   default=dataset.DEFAULT_PATCHES_PER_DEVICE)
    p.add_argument("--out", default="patches.json")
    p.set_defaults(func=cmd_patches)

    p = sub.add_parser("plot", help="render channel maps as images")
    p.add_argument("input", help="map file")
    p.add_argument("--out", default="plots")
    p.set_defaults(func=cmd_plot)

    p = sub.add_parser("validate", help="run property audits on map files")
    p.add_argument("inputs", nargs="+", help="map files")
    p.set_defaults(func=cmd_validate)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except (DeviceError, dataset.SchemaError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except OSError as exc:
        print(f"i/o error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
