import numpy as np
import pytest
import torch

from lesionkit.data import FamilySpec, generate_synthetic_case
from lesionkit.data.types import Case, LesionMask, StructuredReport, Volume


@pytest.fixture(autouse=True)
def _fixed_torch_threads():
    torch.set_num_threads(2)


@pytest.fixture
def simple_report() -> StructuredReport:
    return StructuredReport(
        shape="round-like",
        invasion="no-close-relationship",
        density="hypodense",
        heterogeneity="homogeneous",
        surface="well-defined",
    )


def make_case(shape=(32, 32, 32), lesion_center=(16, 16, 16), lesion_radius=4,
              spacing=(1.0, 1.0, 1.0), case_id="case-0") -> Case:
    """Hand-built case: uniform background with one bright sphere."""
    zz, yy, xx = np.ogrid[: shape[0], : shape[1], : shape[2]]
    cz, cy, cx = lesion_center
    mask = ((zz - cz) ** 2 + (yy - cy) ** 2 + (xx - cx) ** 2) <= lesion_radius**2
    vol = np.full(shape, 0.3, dtype=np.float32)
    vol[mask] = 0.6
    return Case(
        id=case_id,
        volume=Volume(vol, spacing),
        mask=LesionMask(mask.astype(np.uint8)),
        report=StructuredReport(
            shape="round-like",
            invasion="no-close-relationship",
            density="hyperdense",
            heterogeneity="homogeneous",
            surface="well-defined",
        ),
        lesion_type="sphere",
    )


@pytest.fixture
def sphere_case() -> Case:
    return make_case()


@pytest.fixture(scope="session")
def synthetic_case() -> Case:
    return generate_synthetic_case(11, FamilySpec(family="sphere"))
