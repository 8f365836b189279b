import logging

import pytest

from pbrnn import synthetic as sy

# the synthetic generator legitimately produces negative-reflectance warnings
# at high noise; keep test output readable
logging.getLogger("pbrnn.raster_data").setLevel(logging.ERROR)


@pytest.fixture(scope="session")
def small_site(tmp_path_factory):
    """A 40x40, 6-scene site written through the container format."""
    spec = sy.SyntheticSpec(width=40, height=40, seq_len=6, noise_sigma=0.05,
                            cloud_fraction=0.10, region_blob_scale=10, seed=77)
    out = tmp_path_factory.mktemp("site")
    paths = sy.write_site(spec, out)
    return spec, paths
