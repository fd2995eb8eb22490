"""Plenoptic point cloud compression with multiview attribute coding."""

from .errors import PvpcError
from .metrics import RdCurve, RdPoint, attribute_psnr, bd_rate, geometry_d1_d2
from .model import BoundingBox, NormalSet, PlenopticPointCloud, compute_bounding_box, estimate_normals
from .packer import AtlasLayout, pack_patches
from .padder import dilate_pad, find_group_paddable, group_pad
from .patcher import Patch, generate_patches, project_patch, segment_into_patches
from .pipeline import EncoderParams, decode_cloud, encode_cloud
from .ply import read_plenoptic_ply, write_plenoptic_ply
from .reconstructor import DecodedAtlas, reconstruct_cloud
from .structure import CodingStructure, assign_qp, build_coding_structure, dump_structure
from .synthetic import generate_synthetic

__version__ = "0.1.0"

__all__ = [
    "AtlasLayout", "BoundingBox", "CodingStructure", "DecodedAtlas", "EncoderParams", "NormalSet",
    "Patch", "PlenopticPointCloud", "PvpcError", "RdCurve", "RdPoint", "assign_qp",
    "attribute_psnr", "bd_rate", "build_coding_structure", "compute_bounding_box",
    "decode_cloud", "dilate_pad", "dump_structure", "encode_cloud", "estimate_normals",
    "find_group_paddable", "generate_patches", "generate_synthetic", "geometry_d1_d2",
    "group_pad", "pack_patches", "project_patch", "read_plenoptic_ply", "reconstruct_cloud",
    "segment_into_patches", "write_plenoptic_ply",
]
