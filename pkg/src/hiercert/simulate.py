"""Guarantee-verification experiments on synthetic models.

The harness exercises the statistical claims that cannot be checked on a
single run: the familywise type-I bound (no component with a true top
vertex probability at or below tau should be certified, except with
probability alpha per image), the abstain-count dominance of the adaptive
mode over the flat baseline under shared samples, the level distribution
of certified components, and quality-versus-samples curves for the
adaptive, flat, and fixed-level pipelines.
"""

from __future__ import annotations

import json
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import replace
from pathlib import Path

import numpy as np

from .certify import (
    ABSTAIN,
    CertificationConfig,
    certify_adaptive,
    certify_flat,
    run_certification,
)
from .errors import DomainError
from .hierarchy import HierarchyGraph
from .metrics import GroundTruth, abstain_rate, cig
from .sampler import SyntheticModel, make_generator
from .synthetic import (
    boundary_model,
    mixed_model,
    random_distributions,
    random_hierarchy,
    random_thresholds,
    two_group_hierarchy,
    vertex_probabilities,
)


def _worker_count() -> int:
    raw = os.environ.get("HIERCERT_THREADS", "")
    try:
        return max(1, int(raw))
    except ValueError:
        return 1


def _map_trials(fn, trials: int):
    """Run independent trials, optionally across HIERCERT_THREADS workers.

    Results are collected by trial index, so the outcome does not depend
    on scheduling.
    """
    workers = _worker_count()
    if workers == 1:
        return [fn(t) for t in range(trials)]
    with ThreadPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(fn, range(trials)))


def run_type1_experiment(config: CertificationConfig, trials: int,
                         components: int, base_seed: int = 0,
                         hierarchy: HierarchyGraph | None = None,
                         model_factory=None) -> dict:
    """Empirical familywise error rate on a tau-boundary model.

    Every vertex probability of the model is at most tau, so any certified
    component in any trial is a false certification.  The empirical rate of
    trials with at least one false certification is compared against
    alpha + 3 * sqrt(alpha / trials).
    """
    hierarchy = hierarchy or two_group_hierarchy()
    if model_factory is None:
        def model_factory(seed):
            return boundary_model(components, config.tau, seed=seed)

    probe = model_factory(0)
    worst = float(vertex_probabilities(probe, hierarchy).max())
    if worst > config.tau + 1e-9:
        raise DomainError(
            f"type-I model has a vertex probability {worst} above tau={config.tau}; "
            "certifications would not be errors")

    def one(t: int) -> int:
        cert = run_certification(model_factory(base_seed + t), hierarchy, config)
        return int(np.any(cert.result != ABSTAIN))

    flags = _map_trials(one, trials)
    failures = int(np.sum(flags))
    rate = failures / trials
    bound = config.alpha + 3.0 * (config.alpha / trials) ** 0.5
    return {
        "trials": trials, "components": components,
        "trials_with_false_certification": failures,
        "empirical_familywise_rate": rate,
        "bound": bound, "passes": rate <= bound,
        "max_true_vertex_probability": worst,
    }


def run_monotonicity_experiment(config: CertificationConfig, instances: int,
                                max_components: int = 1024,
                                base_seed: int = 0) -> dict:
    """Adaptive abstain count must never exceed the flat baseline's when
    both consume identical selection and test samples.

    Uses the comparable flat variant (candidate classes from the selection
    samples) so the flat candidate is the leaf under the adaptive vertex;
    the dominance then holds count-by-count, which is also checked.
    """
    shared = replace(config, topclass_source="n0")

    def one(t: int) -> dict:
        rng = make_generator(base_seed + 1000 + t)
        hierarchy = random_hierarchy(rng)
        n_comp = int(rng.integers(1, max_components + 1))
        dists = random_distributions(rng, n_comp, hierarchy.leaf_count)
        thresholds = random_thresholds(rng, hierarchy.max_level)
        cfg = replace(shared, thresholds=thresholds)
        seed = int(rng.integers(0, 2**32))
        adaptive = certify_adaptive(SyntheticModel(dists, seed=seed), hierarchy, cfg)
        flat = certify_flat(SyntheticModel(dists, seed=seed), hierarchy, cfg)
        count_ok = bool(np.all(adaptive.candidate_count >= flat.candidate_count))
        return {
            "adaptive_abstains": adaptive.abstain_count,
            "flat_abstains": flat.abstain_count,
            "violation": adaptive.abstain_count > flat.abstain_count,
            "count_dominance": count_ok,
        }

    rows = _map_trials(one, instances)
    violations = sum(r["violation"] for r in rows)
    count_failures = sum(not r["count_dominance"] for r in rows)
    return {
        "instances": instances,
        "violations": int(violations),
        "count_dominance_failures": int(count_failures),
        "passes": violations == 0 and count_failures == 0,
    }


def run_level_distribution(config: CertificationConfig, components: int,
                           seed: int = 0,
                           hierarchy: HierarchyGraph | None = None,
                           model_factory=None) -> dict:
    """Certified-share-per-level comparison between adaptive and flat modes
    on a model mixing confident and fluctuating components."""
    hierarchy = hierarchy or two_group_hierarchy()
    if model_factory is None:
        def model_factory(s):
            return mixed_model(components, seed=s)
    adaptive = certify_adaptive(model_factory(seed), hierarchy, config)
    flat = certify_flat(model_factory(seed), hierarchy, config)
    shares = {"adaptive": adaptive.level_shares(), "flat": flat.level_shares()}
    coarse = {
        mode: sum(pct for lvl, pct in data["certified_per_level"].items()
                  if int(lvl) >= 1)
        for mode, data in shares.items()
    }
    shares["certified_at_level_ge1"] = coarse
    return shares


def run_curves(config: CertificationConfig, n_values, modes, components: int,
               seed: int = 0, hierarchy: HierarchyGraph | None = None,
               model_factory=None) -> list[dict]:
    """CIG and abstain rate versus sample count for each pipeline mode.

    ``modes`` entries are "adaptive", "flat" or "fixed:<level>"; the ground
    truth of a synthetic instance is its per-component most likely class.
    """
    hierarchy = hierarchy or two_group_hierarchy()
    if model_factory is None:
        def model_factory(s):
            return mixed_model(components, seed=s)
    truth = GroundTruth(np.argmax(model_factory(seed).distributions, axis=1))

    rows = []
    for n in n_values:
        for mode in modes:
            if mode.startswith("fixed:"):
                cfg = replace(config, n=int(n), mode="fixed",
                              level=int(mode.split(":", 1)[1]))
            else:
                cfg = replace(config, n=int(n), mode=mode)
            cert = run_certification(model_factory(seed), hierarchy, cfg)
            rows.append({
                "n": int(n), "mode": mode,
                "cig": cig(cert, truth, hierarchy),
                "abstain_rate": abstain_rate(cert, truth),
            })
    return rows


def run_experiment_spec(spec: dict) -> dict:
    """Drive the harness from a JSON experiment spec (see data/demo_experiment)."""
    config = CertificationConfig(
        sigma=spec.get("sigma", 0.25), tau=spec.get("tau", 0.75),
        alpha=spec.get("alpha", 0.001), n=spec.get("n", 100),
        n0=spec.get("n0", 10), thresholds=tuple(spec.get("thresholds", ())))
    seed = int(spec.get("seed", 0))
    report: dict = {"config": config.to_dict(), "seed": seed}

    block = spec.get("type1")
    if block:
        report["type1"] = run_type1_experiment(
            replace(config, thresholds=tuple(block.get("thresholds", (0.3,)))),
            trials=int(block["trials"]), components=int(block["components"]),
            base_seed=seed)
    block = spec.get("monotonicity")
    if block:
        report["monotonicity"] = run_monotonicity_experiment(
            config, instances=int(block["instances"]),
            max_components=int(block.get("max_components", 1024)),
            base_seed=seed)
    block = spec.get("level_distribution")
    if block:
        cfg = replace(config, thresholds=tuple(block.get("thresholds",
                                                         config.thresholds)))
        report["level_distribution"] = run_level_distribution(
            cfg, components=int(block["components"]), seed=seed)
    block = spec.get("curves")
    if block:
        cfg = replace(config, thresholds=tuple(block.get("thresholds",
                                                         config.thresholds)))
        report["curves"] = run_curves(
            cfg, n_values=block["n_values"],
            modes=block.get("modes", ["adaptive", "flat"]),
            components=int(block["components"]), seed=seed)
    return report


def load_experiment_spec(path) -> dict:
    return json.loads(Path(path).read_text())
