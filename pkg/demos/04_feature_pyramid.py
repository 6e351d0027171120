"""Build a feature pyramid from a scenario and sample it two ways.

Level t of the pyramid feeds loop iteration t. The coarsest level is read
on a fixed grid; finer levels are read at the projected positions of the
downsampled mesh, giving features aligned with the current body estimate.
Both reads flatten into one vector for the regressor.
"""

import numpy as np

import meshloop.sampling as smp
from meshloop.camera import project_weak
from meshloop.kinematics import pose_mesh
from meshloop.scenarios import make_scenario
from meshloop.toybody import toy_body_model


def main():
    model = toy_body_model(seed=0)
    scenario = make_scenario(model, 0, noise=0.02)

    print("pyramid levels (channels x height x width):")
    for t, level in enumerate(scenario.pyramid.levels):
        print(f"  iteration {t}: {level.channels} x {level.height} x {level.width}")

    coarse = scenario.pyramid.levels[0]
    grid = smp.grid_points(5)
    grid_feats = smp.bilinear_sample(coarse, grid.points)
    print(f"\ngrid read: {grid.points.shape[0]} points -> {grid_feats.shape} features")

    fine = scenario.pyramid.levels[-1]
    posed = pose_mesh(model, scenario.gt_params)
    reduced = model.downsample_matrix @ posed.vertices
    aligned = smp.mesh_aligned_points(reduced, scenario.gt_params.camera)
    mesh_feats = smp.bilinear_sample(fine, aligned.points)
    print(f"mesh-aligned read: {reduced.shape[0]} vertices -> {mesh_feats.shape} features")

    flat = smp.reduce_and_concat(mesh_feats)
    print(f"reduced and flattened: {flat.shape[0]} values "
          f"({reduced.shape[0]} points x {smp.DEFAULT_REDUCE_DIM} kept channels)")

    down = smp.box_downsample(fine.data, 4)
    print(f"\nbox downsample of the finest level by 4: {fine.data.shape} -> {down.shape}")


if __name__ == "__main__":
    main()
