import numpy as np
import pytest
from hypothesis import HealthCheck, settings

import liplearn as ll

settings.register_profile(
    "ci",
    derandomize=True,
    deadline=None,
    max_examples=40,
    suppress_health_check=[HealthCheck.too_slow],
)
settings.load_profile("ci")


def tiny_line_instance():
    """Two vertices at 0 and 1 on the line, one sample each with labels 0, 1."""
    vs = ll.VertexSet(np.array([[0.0], [1.0]]))
    graph = ll.Graph(vs, np.array([[0, 1]]), np.array([1.0]))
    ds = ll.LabeledDataset(np.array([[0.0], [1.0]]), np.array([[0.0], [1.0]]))
    part = ll.partition_dataset(vs, ds)
    spec = ll.LossSpec.squared_for_box([0.0], [1.0])
    return graph, part, ds, spec


def random_instance(rng, n=None, k=None, dim_y=None, spread=0.01):
    """Small random instance with every cell nonempty (unique optimum)."""
    n = n or int(rng.integers(4, 21))
    k = k or int(rng.integers(1, min(5, n)))
    dim_y = dim_y or int(rng.integers(1, 4))
    pts = rng.uniform(0, 1, (n, 2))
    vs = ll.VertexSet(pts)
    kk = k
    while True:
        try:
            graph = ll.build_knn_graph(vs, kk)
            break
        except ll.exceptions.GraphDisconnectedError:
            kk += 1
    xs, ys = [], []
    for i in range(n):
        for _ in range(int(rng.integers(1, 4))):
            xs.append(pts[i] + rng.normal(0, spread, 2))
            ys.append(rng.uniform(0, 1, dim_y))
    ds = ll.LabeledDataset(np.array(xs), np.array(ys))
    part = ll.partition_dataset(vs, ds)
    spec = ll.LossSpec.squared_for_box(np.zeros(dim_y), np.ones(dim_y))
    return graph, part, ds, spec


@pytest.fixture(scope="session")
def desk_checkerboard():
    """Medium checkerboard instance shared across solver tests."""
    ds = ll.gen_checkerboard(ll.CheckerboardSpec(3000, 4, 2))
    train, test = ll.split(ds, 0.2, 5)
    vs = ll.select_vertices(train, 120, "iid", 7)
    graph = ll.build_knn_graph(vs, 10)
    part = ll.partition_dataset(vs, train)
    spec = ll.LossSpec.squared_for_simplex(2)
    return train, test, vs, graph, part, spec
