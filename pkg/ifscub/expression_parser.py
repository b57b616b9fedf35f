"""Numeric expressions for fractal configs and command line flags.

Map coefficients are often easier to state than to type out: "1/3", "(sqrt(5) - 1)/2", "cos(0.4)", "45 deg".
An expression is scanned into tokens, reordered into postfix form by the shunting-yard algorithm and then
evaluated on a stack of pint quantities. Supported are + - * / ^, unary minus, parentheses, a handful of
elementary functions and the constant pi. Any other word is looked up as a unit, which is how angles in
degrees work; the final value must be dimensionless.

"""

import math
import operator
import re
from collections.abc import Callable, Iterator
from dataclasses import dataclass
from typing import final

from pint import UnitRegistry
from pint.errors import DimensionalityError, UndefinedUnitError
from pint.facets.plain import PlainQuantity

from .errors import ValidationError

registry = UnitRegistry()
Quantity = registry.Quantity
Unit = registry.Unit

TOKEN_RE = re.compile(
    r"""\s*(?:
        (?P<number>(?:\d+(?:\.\d*)?|\.\d+)(?:[eE][-+]?\d+)?)
        |(?P<word>[A-Za-z_]\w*)
        |(?P<symbol>[-+*/^()])
    )""",
    re.VERBOSE,
)

FUNCTIONS: dict[str, Callable[[float], float]] = {
    "sin": math.sin,
    "cos": math.cos,
    "tan": math.tan,
    "asin": math.asin,
    "acos": math.acos,
    "atan": math.atan,
    "sqrt": math.sqrt,
    "log": math.log,
    "log10": math.log10,
    "exp": math.exp,
    "abs": abs,
}

CONSTANTS = {"pi": math.pi}


@dataclass(frozen=True, slots=True)
class Infix:
    symbol: str
    precedence: int
    right_assoc: bool
    apply: Callable[[PlainQuantity[float], PlainQuantity[float]], PlainQuantity[float]]


@dataclass(frozen=True, slots=True)
class Negate:
    # Binds tighter than * and / but looser than ^, so "-2^2" is -4
    precedence: int = 3
    right_assoc: bool = True


@dataclass(frozen=True, slots=True)
class Value:
    quantity: PlainQuantity[float]


@dataclass(frozen=True, slots=True)
class UnitWord:
    unit: object


@dataclass(frozen=True, slots=True)
class Call:
    name: str


@dataclass(frozen=True, slots=True)
class Open:
    pass


@dataclass(frozen=True, slots=True)
class Close:
    pass


INFIX = {
    "+": Infix("+", 1, False, operator.add),
    "-": Infix("-", 1, False, operator.sub),
    "*": Infix("*", 2, False, operator.mul),
    "/": Infix("/", 2, False, operator.truediv),
    "^": Infix("^", 4, True, operator.pow),
}

Token = Value | UnitWord | Infix | Negate | Call | Open | Close
Postfix = Value | UnitWord | Infix | Negate | Call


class ParseError(ValidationError):
    """An expression could not be parsed or evaluated."""


def _plain(value: float) -> PlainQuantity[float]:
    return Quantity(value, "dimensionless")


def _word(word: str) -> Token:
    if word in FUNCTIONS:
        return Call(word)
    if word in CONSTANTS:
        return Value(_plain(CONSTANTS[word]))
    try:
        return UnitWord(registry.Unit(word))
    except (UndefinedUnitError, ValueError):
        raise ParseError(f"Unknown unit or function {word}")


def tokenize(expression: str) -> list[Token]:
    """Splits an expression into tokens; a "-" with no left operand becomes a negation."""
    tokens: list[Token] = []
    text = expression.rstrip()
    pos = 0
    while pos < len(text):
        match = TOKEN_RE.match(text, pos)
        if match is None:
            raise ParseError(f"Unknown token in {text[pos:]!r}")
        pos = match.end()
        if (number := match["number"]) is not None:
            tokens.append(Value(_plain(float(number))))
        elif (word := match["word"]) is not None:
            tokens.append(_word(word))
        elif (symbol := match["symbol"]) == "(":
            tokens.append(Open())
        elif symbol == ")":
            tokens.append(Close())
        elif symbol == "-" and (not tokens or isinstance(tokens[-1], Infix | Negate | Call | Open)):
            tokens.append(Negate())
        else:
            tokens.append(INFIX[symbol])
    return tokens


def to_postfix(tokens: list[Token]) -> Iterator[Postfix]:
    """Reorders infix tokens into postfix order."""
    pending: list[Infix | Negate | Call | Open] = []
    for token in tokens:
        match token:
            case Value() | UnitWord():
                yield token
            case Call() | Open() | Negate():
                # Prefix tokens have no left operand to finish first
                pending.append(token)
            case Infix():
                while pending and isinstance(top := pending[-1], Infix | Negate) and (
                    top.precedence > token.precedence
                    or (top.precedence == token.precedence and not token.right_assoc)
                ):
                    yield pending.pop()
                pending.append(token)
            case Close():
                while pending and not isinstance(pending[-1], Open):
                    top = pending.pop()
                    assert not isinstance(top, Open)
                    yield top
                if not pending:
                    raise ParseError("Mismatched parentheses")
                pending.pop()
                if pending and isinstance(pending[-1], Call):
                    yield pending.pop()
    while pending:
        top = pending.pop()
        if isinstance(top, Open):
            raise ParseError("Mismatched parentheses")
        yield top


def _call(name: str, argument: PlainQuantity[float]) -> PlainQuantity[float]:
    if not argument.dimensionless:
        raise ParseError(f"Cannot apply function {name} to a quantity with units")
    try:
        return _plain(FUNCTIONS[name](argument.m_as("dimensionless")))
    except (ValueError, OverflowError):
        raise ParseError(f"{name} is undefined at {argument}")


def evaluate_postfix(tokens: Iterator[Postfix]) -> PlainQuantity[float]:
    stack: list[PlainQuantity[float]] = []
    for token in tokens:
        match token:
            case Value(quantity):
                stack.append(quantity)
            case UnitWord(unit):
                if not stack:
                    raise ParseError(f"Unit '{unit}' has no magnitude")
                if stack[-1].unitless:
                    # "45 deg": the unit belongs to the number before it
                    stack[-1] = Quantity(stack[-1].magnitude, unit)
                else:
                    stack.append(Quantity(1.0, unit))
            case Negate():
                if not stack:
                    raise ParseError("Nothing to negate")
                stack[-1] = -stack[-1]
            case Call(name):
                if not stack:
                    raise ParseError(f"Not enough arguments for function {name}")
                stack[-1] = _call(name, stack[-1])
            case Infix(symbol=symbol, apply=apply):
                if len(stack) < 2:
                    raise ParseError(f"Not enough arguments for operator {symbol}")
                right = stack.pop()
                try:
                    stack[-1] = apply(stack[-1], right)
                except DimensionalityError:
                    raise ParseError(f"Incompatible units for operator {symbol}")
                except (ZeroDivisionError, OverflowError) as e:
                    raise ParseError(f"Cannot evaluate {symbol}: {e}")
    if len(stack) != 1:
        raise ParseError("Invalid expression")
    return stack[0]


@final
class ExpressionParser:
    """Evaluates numeric expressions, optionally carrying units."""

    def parse(self, expression: str) -> PlainQuantity[float]:
        """Returns the value of an expression as a quantity."""
        return evaluate_postfix(to_postfix(tokenize(expression)))

    def evaluate(self, expression: str) -> float:
        """Returns the value of an expression as a plain float, converting units such as degrees."""
        result = self.parse(expression)
        try:
            value = float(result.m_as("dimensionless"))
        except DimensionalityError:
            raise ParseError(f"{expression!r} is not a plain number (units {result.units})")
        if not math.isfinite(value):
            raise ParseError(f"{expression!r} is not finite")
        return value


_parser = ExpressionParser()


def evaluate_number(value: float | int | str) -> float:
    """Returns a JSON number as-is, or evaluates a string expression."""
    if isinstance(value, bool):
        raise ParseError(f"Expected a number, got {value!r}")
    if isinstance(value, int | float):
        if not math.isfinite(value):
            raise ParseError(f"{value!r} is not finite")
        return float(value)
    return _parser.evaluate(value)
