"""Shared fixtures: small hand tables, random tables, and a full-scale synthetic dataset."""

import numpy as np
import pytest

from rsa_metaphor import (
    FeatureVocab,
    HumanResponseTable,
    MetaphorItem,
    TypicalityTable,
    save_dataset,
)

N_CATEGORIES = 48
N_FEATURES = 59
N_METAPHORS = 24


def random_table(rng, n_categories, n_features, floor=0.1):
    """Random typicality table with entries bounded away from 0 and 1.

    Mixing a Dirichlet draw with the uniform row keeps every entry at least
    floor/n while preserving unit row sums.
    """
    raw = rng.dirichlet(np.ones(n_features), size=n_categories)
    values = (1.0 - floor) * raw + floor / n_features
    vocab = FeatureVocab(tuple(f"f{i}" for i in range(n_features)))
    categories = tuple(f"c{i}" for i in range(n_categories))
    return TypicalityTable(categories, vocab, values)


def table_from_rows(rows, categories=None, features=None):
    rows = np.asarray(rows, dtype=float)
    n_cat, n_feat = rows.shape
    categories = tuple(categories or (f"c{i}" for i in range(n_cat)))
    features = tuple(features or (f"f{i}" for i in range(n_feat)))
    return TypicalityTable(categories, FeatureVocab(features), rows)


def as_oracle_table(table):
    """Package table -> plain dict for the brute-force oracle."""
    return {c: table.row(c).tolist() for c in table.categories}


def make_synthetic_dataset(seed=0, n_categories=N_CATEGORIES, n_features=N_FEATURES,
                           n_metaphors=N_METAPHORS, participants=40):
    """Full-scale synthetic dataset: table, metaphor items, human responses.

    Human responses simulate a forced-choice task: each participant picks one
    feature, drawn from a blend of the vehicle's and topic's typicality rows,
    so the counts look like real selection frequencies.
    """
    rng = np.random.default_rng(seed)
    table = random_table(rng, n_categories, n_features)
    categories = table.categories

    items = []
    responses = {}
    for m in range(n_metaphors):
        topic = categories[m]
        vehicle = categories[n_metaphors + m]
        inherence = "inherent" if m % 2 == 0 else "non_inherent"
        item = MetaphorItem(
            id=f"m{m:02d}", topic=topic, vehicle=vehicle,
            inherence=inherence, familiarity=float(rng.uniform(1, 7)),
        )
        items.append(item)
        blend = 0.5 * table.row(topic) + 0.5 * table.row(vehicle)
        counts = rng.multinomial(participants, blend).astype(float)
        counts[int(np.argmax(blend))] += 1.0  # guarantee a nonzero total
        dist = counts / counts.sum()
        dist.setflags(write=False)
        responses[item.id] = dist

    human = HumanResponseTable(table.vocab, responses)
    return table, tuple(items), human


@pytest.fixture
def two_by_two():
    """Hand table: topic row [0.6, 0.4], vehicle row [0.25, 0.75]."""
    table = table_from_rows([[0.6, 0.4], [0.25, 0.75]], ("alpha", "beta"), ("f1", "f2"))
    item = MetaphorItem("m1", "alpha", "beta")
    return table, item


@pytest.fixture(scope="session")
def full_scale():
    return make_synthetic_dataset(seed=0)


@pytest.fixture
def dataset_dir(tmp_path):
    """A small valid dataset written to disk."""
    table = table_from_rows(
        [[0.6, 0.3, 0.1], [0.2, 0.5, 0.3], [0.25, 0.25, 0.5]],
        ("workers", "ants", "owls"),
        ("diligence", "numerosity", "wisdom"),
    )
    items = (
        MetaphorItem("m1", "workers", "ants", "non_inherent", 4.5),
        MetaphorItem("m2", "workers", "owls", "inherent", None),
    )
    responses = {
        "m1": np.array([0.5, 0.4, 0.1]),
        "m2": np.array([0.2, 0.2, 0.6]),
    }
    human = HumanResponseTable(table.vocab, responses)
    data_dir = tmp_path / "data"
    save_dataset(table, items, human, data_dir)
    return data_dir
