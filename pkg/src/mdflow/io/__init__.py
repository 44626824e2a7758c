"""Scenario files, mesh import/export, VTK output and configuration-driven runs."""
from mdflow.io.config import ScenarioConfig, parse_config, parse_config_string
from mdflow.io.meshio import bucket_from_dict, bucket_to_dict, export_mesh, import_mesh
from mdflow.io.runner import build_bucket, run
from mdflow.io.vtk import cell_velocity, write_vtk

__all__ = [
    "ScenarioConfig",
    "bucket_from_dict",
    "bucket_to_dict",
    "build_bucket",
    "cell_velocity",
    "export_mesh",
    "import_mesh",
    "parse_config",
    "parse_config_string",
    "run",
    "write_vtk",
]
