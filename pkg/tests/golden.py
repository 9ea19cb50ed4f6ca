"""Golden renormalisation-map formulas, written as products of linear combinations."""
from wzphi4.symbolic import LinComb, parse


def T(s: str) -> LinComb:
    return LinComb.of(parse(s))


def golden_M() -> dict:
    """Eight reference formulas for M (the X_i family checked per direction)."""
    C1, C2, Psi = T("C1"), T("C2"), T("Psi")
    r2 = T("Psi^2") - C1
    i2 = T("I(Psi^2)") - T("I(C1)")
    i3 = T("I(Psi^3)") - T("I(C1*Psi)") * 3
    out = {
        "Psi^2": r2,
        "Psi^3": T("Psi^3") - C1 * Psi * 3,
        "I(Psi^2)": i2,
        "I(Psi^2)*Psi^2": i2 * r2 - C2,
        "I(Psi^3)*Psi": i3 * Psi,
        "I(Psi^3)*Psi^2": i3 * r2 - C2 * Psi * 3,
        "I(Psi)*Psi^2": T("I(Psi)") * r2,
    }
    for i in (1, 2, 3):
        out[f"X{i}*Psi^2"] = T(f"X{i}") * r2
    return out


F_MINUS = ["Xi", "Psi", "Psi^2", "Psi^3", "X1*Psi^2", "X2*Psi^2", "X3*Psi^2",
           "I(Psi^3)*Psi", "I(Psi^2)*Psi^2", "I(Psi^3)*Psi^2"]
F_ZERO_EXTRA = ["1", "X1", "X2", "X3", "I(Psi^2)", "I(Psi)*Psi", "I(Psi)*Psi^2"]
