#ifndef POSEVID_FIGURE_HPP
#define POSEVID_FIGURE_HPP

#include <array>
#include <cstdint>
#include <string>
#include <vector>

namespace posevid {

// Joint tree of the synthetic 2.5D stick figure. Every joint except the root
// carries one bone from its parent: bone direction = parent bone's absolute
// direction rotated by angle[j]; children of the root rotate relative to the
// global "up" direction. Positions are in normalized image units ([0,1]^2
// on-frame, y down).
enum Joint : int {
    J_PELVIS = 0,
    J_NECK,
    J_HEAD_TOP,
    J_L_SHOULDER,
    J_L_ELBOW,
    J_L_WRIST,
    J_L_PALM,
    J_L_FINGER0,
    J_L_FINGER1,
    J_L_FINGER2,
    J_L_FINGER3,
    J_L_FINGER4,
    J_R_SHOULDER,
    J_R_ELBOW,
    J_R_WRIST,
    J_R_PALM,
    J_R_FINGER0,
    J_R_FINGER1,
    J_R_FINGER2,
    J_R_FINGER3,
    J_R_FINGER4,
    J_L_HIP,
    J_L_KNEE,
    J_L_ANKLE,
    J_R_HIP,
    J_R_KNEE,
    J_R_ANKLE,
    kNumJoints
};

// Body segments; the unit of surface rendering, depth ordering, and limb
// dropout.
enum Limb : int {
    LIMB_TORSO = 0,
    LIMB_HEAD,
    LIMB_L_UPPER_ARM,
    LIMB_L_FOREARM,
    LIMB_L_HAND,
    LIMB_R_UPPER_ARM,
    LIMB_R_FOREARM,
    LIMB_R_HAND,
    LIMB_L_THIGH,
    LIMB_L_SHIN,
    LIMB_R_THIGH,
    LIMB_R_SHIN,
    kNumLimbs
};

extern const std::array<int, kNumJoints> kJointParent;
extern const std::array<double, kNumJoints> kRestBoneLen;
extern const std::array<double, kNumJoints> kRestAngle;
extern const std::array<const char*, kNumJoints> kJointName;

struct Vec2 {
    double x = 0.0;
    double y = 0.0;
};

struct ArticulatedFigure {
    std::array<double, kNumJoints> bone_len{};  // normalized units
    std::array<double, kNumJoints> angle{};     // radians, relative to parent bone
    double root_x = 0.5;
    double root_y = 0.55;
    uint64_t appearance_seed = 0;
    // Scripted 2.5D state: painter depth per limb (larger = farther) and the
    // per-hand depth/curl driving the hands render.
    std::array<double, kNumLimbs> limb_depth{};
    std::array<double, 2> hand_depth{};  // [left, right], in [0,1]
    std::array<double, 2> hand_curl{};   // 0 = open, 1 = fist

    bool operator==(const ArticulatedFigure& o) const = default;
};

// Rest pose with default bone lengths, depths, open hands.
ArticulatedFigure rest_figure();

// Forward kinematics: absolute joint positions in normalized units.
std::array<Vec2, kNumJoints> forward_kinematics(const ArticulatedFigure& fig);

// Periodic motion driving the figure track of a clip.
struct MotionSpec {
    std::string preset = "walk";  // walk | wave | sway | jump
    double amplitude = 1.0;
    double frequency_hz = 1.0;
    int fps = 8;

    bool operator==(const MotionSpec& o) const = default;
};

// Figure state at frame f. Pure function of (spec, seed, f); amplitude 0
// yields the same state for every f.
ArticulatedFigure figure_at_frame(const MotionSpec& spec, uint64_t seed, int frame);

}  // namespace posevid

#endif
