from enum import Enum


class Role(str, Enum):
    A = "A"
    B = "B"
    RELAY = "R"

    @property
    def other(self) -> "Role":
        if self is Role.A:
            return Role.B
        if self is Role.B:
            return Role.A
        raise ValueError("the relay has no peer role")


END_NODES = (Role.A, Role.B)
