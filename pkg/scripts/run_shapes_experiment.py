"""Train the three tiers on synthetic shapes, report accuracies and map concentration,
and render dominant-map overlays for a few test images.

    python scripts/run_shapes_experiment.py --out runs/shapes --epochs 15
"""
import argparse
import json
from pathlib import Path


from armaps import checkpoint, render
from armaps.attentive import visualize
from armaps.experiments import REFERENCE_ACCURACY, landmark_concentration, run_shapes_experiment


def main():
    ap = argparse.ArgumentParser()
    ap.add_argument("--out", default="runs/shapes")
    ap.add_argument("--epochs", type=int, default=15)
    ap.add_argument("--seed", type=int, default=0)
    ap.add_argument("--examples", type=int, default=6)
    args = ap.parse_args()
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)

    exp = run_shapes_experiment(seed=args.seed, epochs=args.epochs)
    results = {}
    for name, tier in exp.tiers.items():
        conc = {mode: landmark_concentration(tier.model, exp.test_data.images, exp.test_masks, mode=mode)[0]
                for mode in ("linear", "rectified")}
        results[name] = {"test_accuracy": tier.accuracy, "landmark_concentration": conc,
                         "reference_accuracy": REFERENCE_ACCURACY[name], "seconds": tier.seconds}
        stem = name.replace("+", "_")
        checkpoint.save(tier.model, out / f"{stem}.armc")
        for i in range(args.examples):
            img = exp.test_data.images[i]
            vis = visualize(tier.model, img, 25)
            dom = render.normalize_map(vis.dominant.value_map)
            render.write_image(render.overlay(img, dom), out / f"{stem}_overlay_{i}.png")
            render.write_image(render.unit_panel(img, vis.maps[:9], 3), out / f"{stem}_top9_{i}.png")
        print(f"{name:>11}: accuracy {tier.accuracy:.3f}  concentration linear {conc['linear']:.3f}"
              f" rectified {conc['rectified']:.3f}")
    (out / "results.json").write_text(json.dumps(results, indent=2, sort_keys=True) + "\n")


if __name__ == "__main__":
    main()
