"""Merge a separately estimated hand pose into a full-body skeleton.

A hand expert reports the left hand twisted 100 degrees about the forearm.
Copying its global orientation onto the wrist joint reproduces it exactly
but leaves all 100 degrees on one joint; the adaptive strategy relocates
the out-of-range excess onto the elbow, changing no joint position and no
hand orientation.
"""

import numpy as np

import meshloop.integration as intg
import meshloop.rotations as rot
from meshloop.camera import WeakPerspectiveCamera
from meshloop.kinematics import forward_kinematics, shape_blend
from meshloop.toybody import generate_model


def main():
    model = generate_model("fullbody", seed=0)
    _, rest = shape_blend(model, np.zeros(model.n_shape))
    elbow = model.tree.index("left_elbow")
    wrist = model.tree.index("left_wrist")
    axis = rest[wrist] - rest[elbow]
    axis /= np.linalg.norm(axis)

    estimates = intg.PartEstimates(
        body_theta=np.broadcast_to(np.eye(3), (intg.N_BODY_JOINTS, 3, 3)).copy(),
        body_beta=np.zeros(model.n_shape),
        camera=WeakPerspectiveCamera(),
        left_hand=intg.HandEstimate(
            global_orient=rot.quat_to_matrix(rot.twist_quat(axis, np.deg2rad(100.0))),
            finger_theta=np.broadcast_to(np.eye(3), (intg.N_FINGER_JOINTS, 3, 3)).copy(),
            confidence=1.0))

    results = {}
    for strategy in (intg.MODE_COPY_PASTE, intg.MODE_ADAPTIVE):
        params, report = intg.adaptive_integrate(estimates, model, strategy=strategy)
        hand = next(h for h in report.hands if h.side == "left")
        posed = forward_kinematics(model.tree, params.theta, rest)
        results[strategy] = (params, posed)
        print(f"strategy {strategy}:")
        print(f"  measured forearm twist {np.rad2deg(hand.alpha_tw):6.1f} deg")
        if hand.alpha_cp is not None:
            print(f"  moved to elbow        {np.rad2deg(hand.alpha_cp):6.1f} deg")
        print(f"  left at wrist         {np.rad2deg(hand.residual_twist):6.1f} deg")

    (_, posed_cp), (_, posed_ad) = results.values()
    pos_diff = np.abs(posed_cp.joint_positions - posed_ad.joint_positions).max()
    orient_diff = rot.geodesic_distance(posed_cp.global_rotations[wrist],
                                        posed_ad.global_rotations[wrist])
    print(f"\nmax joint position difference between strategies: {pos_diff:.2e}")
    print(f"hand orientation difference:                      {orient_diff:.2e}")


if __name__ == "__main__":
    main()
