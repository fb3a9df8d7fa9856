"""Synthetic cohort of home-days standing in for private clinical data.

Each home has a diurnal Poisson activity profile per sensor built from
Gaussian bumps, scaled by home-specific gains and shifted by up to one hour.
Day-level counts are gamma-mixed Poisson draws (overdispersed) plus a
background Poisson process modelling other occupants.

Agitation days are a modelling choice, not measured behaviour: a night-time
episode of a few hours adds bathroom/hallway/bedroom transitions, and the
whole day is drawn with a smaller gamma shape, i.e. more dispersed counts.
"""

import datetime as dt
from dataclasses import asdict, dataclass

import numpy as np

from ..errors import ValidationError
from ..rng import stream
from .matrix import HOURS, DailyActivityMatrix, Label

# (center hour, width, amplitude) bumps per sensor, in events per hour
_PROFILE = {
    "bathroom": [(7.5, 1.0, 2.5), (13.0, 2.0, 0.8), (21.5, 1.0, 1.8)],
    "hallway": [(8.0, 1.5, 2.0), (13.0, 3.0, 1.2), (19.0, 2.0, 1.5)],
    "bedroom": [(7.0, 1.0, 2.0), (22.0, 1.0, 2.2)],
    "lounge": [(11.0, 2.0, 2.0), (16.0, 2.5, 3.0), (20.0, 1.5, 3.0)],
    "kitchen": [(8.0, 1.0, 3.5), (12.5, 1.0, 3.0), (18.0, 1.2, 3.5)],
    "fridge-door": [(8.0, 1.0, 1.5), (12.5, 1.0, 1.5), (18.0, 1.0, 1.8)],
    "kettle": [(8.0, 0.8, 1.5), (11.0, 1.0, 0.7), (15.5, 1.0, 0.8)],
    "microwave": [(12.5, 0.8, 0.8), (18.5, 0.8, 0.9)],
}
_NIGHT_RATE = np.array([0.2, 0.15, 0.3, 0.02, 0.03, 0.01, 0.0, 0.0])
_AGITATION_WEIGHTS = np.array([1.0, 0.8, 1.0, 0.25, 0.2, 0.05, 0.05, 0.0])
_NIGHT_HOURS = np.array([22, 23, 0, 1, 2, 3, 4, 5])


def diurnal_profile():
    hours = np.arange(HOURS)
    rates = np.tile(_NIGHT_RATE, (HOURS, 1))
    for s, bumps in enumerate(_PROFILE.values()):
        for center, width, amp in bumps:
            rates[:, s] += amp * np.exp(-0.5 * ((hours - center) / width) ** 2)
    return rates


@dataclass(frozen=True)
class CohortSpec:
    n_homes: int = 20
    days_per_home: int = 30
    labelled_fraction: float = 0.15
    positive_fraction: float = 0.35
    seed: int = 0
    home_prefix: str = "home"
    start_date: str = "2019-08-01"
    positive_home_fraction: float = 0.4
    prevalence_positive_home: float = 0.25
    prevalence_negative_home: float = 0.03
    agitation_strength: float = 1.0
    home_gain_shape: float = 4.0
    dispersion: float = 8.0
    agitation_dispersion: float = 3.0
    background_rate: float = 0.05

    def __post_init__(self):
        for name in ("labelled_fraction", "positive_fraction", "positive_home_fraction",
                     "prevalence_positive_home", "prevalence_negative_home"):
            v = getattr(self, name)
            if not 0.0 <= v <= 1.0:
                raise ValidationError(f"{name} must lie in [0, 1], got {v}")
        if self.n_homes < 0 or self.days_per_home < 0:
            raise ValidationError("home and day counts must be non-negative")

    @property
    def n_days(self):
        return self.n_homes * self.days_per_home

    @property
    def n_labelled(self):
        return int(round(self.labelled_fraction * self.n_days))

    @property
    def n_positive(self):
        return int(round(self.positive_fraction * self.n_labelled))

    def to_dict(self):
        return asdict(self)


@dataclass
class Cohort:
    labelled: list
    unlabelled: list
    home_tags: dict  # home id -> "positive-cohort" / "negative-cohort"
    truth: dict  # (home id, date) -> bool agitation, for every generated day

    @property
    def home_ids(self):
        return sorted(self.home_tags)


def _home_id(spec, i):
    return f"{spec.home_prefix}{i:03d}"


def generate_cohort(spec):
    """Deterministic labelled/unlabelled sets for ``spec``.

    Exactly ``round(labelled_fraction * days)`` days are labelled, of which
    exactly ``round(positive_fraction * labelled)`` are agitation days.
    """
    n_days, n_lab, n_pos = spec.n_days, spec.n_labelled, spec.n_positive
    if n_lab > 0 and n_pos == 0:
        raise ValidationError(f"positive_fraction {spec.positive_fraction} yields no agitation day "
                              f"among {n_lab} labelled days")
    alloc = stream(spec.seed, "cohort", "allocation")
    n_pos_homes = int(round(spec.positive_home_fraction * spec.n_homes))
    home_order = alloc.permutation(spec.n_homes)
    positive_home = np.zeros(spec.n_homes, dtype=bool)
    positive_home[home_order[:n_pos_homes]] = True

    day_home = np.repeat(np.arange(spec.n_homes), spec.days_per_home)
    labelled_idx = np.sort(alloc.permutation(n_days)[:n_lab])
    agitation = np.zeros(n_days, dtype=bool)
    if n_lab:
        weights = np.where(positive_home[day_home[labelled_idx]], 6.0, 1.0)
        chosen = alloc.choice(n_lab, size=n_pos, replace=False, p=weights / weights.sum())
        agitation[labelled_idx[chosen]] = True
    is_labelled = np.zeros(n_days, dtype=bool)
    is_labelled[labelled_idx] = True
    prevalence = np.where(positive_home[day_home], spec.prevalence_positive_home, spec.prevalence_negative_home)
    draws = alloc.random(n_days)
    agitation |= (~is_labelled) & (draws < prevalence)

    start = dt.date.fromisoformat(spec.start_date)
    base = diurnal_profile()
    labelled, unlabelled, truth = [], [], {}
    for h in range(spec.n_homes):
        rng = stream(spec.seed, "cohort", "home", h)
        home = _home_id(spec, h)
        gains = rng.gamma(spec.home_gain_shape, 1.0 / spec.home_gain_shape, size=base.shape[1])
        shift = int(rng.integers(-1, 2))
        rates = np.roll(base, shift, axis=0) * gains
        intensity = rng.gamma(4.0, 0.25)
        for d in range(spec.days_per_home):
            idx = h * spec.days_per_home + d
            lam = rates * rng.gamma(20.0, 1.0 / 20.0)
            shape = spec.dispersion
            if agitation[idx]:
                onset = int(rng.integers(0, len(_NIGHT_HOURS) - 2))
                length = int(rng.integers(2, 5))
                hours = _NIGHT_HOURS[onset:onset + length]
                boost = 1.5 * spec.agitation_strength * intensity
                lam[hours] += boost * _AGITATION_WEIGHTS * gains
                shape = spec.agitation_dispersion
            lam = lam * rng.gamma(shape, 1.0 / shape, size=lam.shape)
            counts = rng.poisson(lam) + rng.poisson(spec.background_rate, size=lam.shape)
            date = start + dt.timedelta(days=d)
            truth[(home, date)] = bool(agitation[idx])
            if is_labelled[idx]:
                label = Label.AGITATION if agitation[idx] else Label.NOT_AGITATION
                labelled.append(DailyActivityMatrix(home, date, counts, label))
            else:
                unlabelled.append(DailyActivityMatrix(home, date, counts, Label.UNLABELLED))
    tags = {_home_id(spec, h): ("positive-cohort" if positive_home[h] else "negative-cohort")
            for h in range(spec.n_homes)}
    return Cohort(labelled, unlabelled, tags, truth)
