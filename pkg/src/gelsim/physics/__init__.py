from .bodies import (
    BodyBatch,
    RigidBodyState,
    solid_box_inertia,
    solid_cylinder_inertia,
    solid_sphere_inertia,
)
from .contacts import ContactGroup, Contacts, generate_contacts
from .solver import (
    SoftContactParams,
    SolverConfig,
    apply_patch_friction,
    contact_impulse_implicit,
    solver_step,
)

__all__ = [
    "BodyBatch", "RigidBodyState", "solid_box_inertia",
    "solid_cylinder_inertia", "solid_sphere_inertia",
    "ContactGroup", "Contacts", "generate_contacts",
    "SoftContactParams", "SolverConfig", "apply_patch_friction",
    "contact_impulse_implicit", "solver_step",
]
