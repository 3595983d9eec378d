"""Exception hierarchy.

Every error the toolchain raises on purpose derives from AdaflowError, so
callers (and the fuzz harness) can distinguish diagnosed failures from bugs.
"""


class AdaflowError(Exception):
    """Base class for all diagnosed toolchain errors."""


# --- model file parsing ---------------------------------------------------

class MalformedWire(AdaflowError):
    """Truncated or invalid protobuf wire data."""


class MalformedJson(AdaflowError):
    """JSON mirror text does not follow the documented schema."""


class UnsupportedElementType(AdaflowError):
    """Tensor element type outside the supported set."""


class CyclicGraph(AdaflowError):
    """Node graph admits no topological order."""


class DanglingInput(CyclicGraph):
    """Node consumes a name that nothing produces."""


class SizeMismatch(AdaflowError):
    """Tensor byte length disagrees with dims and element size."""


# --- fixed point ----------------------------------------------------------

class CodeOutOfRange(AdaflowError):
    """Integer code outside the representable range of its format."""


class WidthOverflow(AdaflowError):
    """Derived word width exceeds the 64-bit implementation limit."""


# --- IR construction ------------------------------------------------------

class UnsupportedOp(AdaflowError):
    """Operator outside the supported CNN subset."""


class MissingQuantization(AdaflowError):
    """Compute layer lacks activation or weight quantization annotations."""


class ShapeMismatch(AdaflowError):
    """Tensor shapes disagree along a graph edge or with hyperparameters."""


class NonConstantBN(AdaflowError):
    """BatchNormalization parameters are not constant initializers."""


class OrphanBN(AdaflowError):
    """BatchNormalization does not directly follow a convolution."""


# --- dataflow lowering and validation --------------------------------------

class UnloweredLayerKind(AdaflowError):
    """Layer kind without a streaming template."""


class RateMismatch(AdaflowError):
    """Per-inference token production and consumption disagree on a channel."""


class FormatMismatch(AdaflowError):
    """Channel token format disagrees with an endpoint port."""


class NotADag(AdaflowError):
    """Actor network contains a cycle."""


# --- merging ----------------------------------------------------------------

class TopologyMismatch(AdaflowError):
    """Profiles to merge do not share the same layer structure."""


class DuplicateProfileName(AdaflowError):
    """Two merge inputs carry the same profile name."""


class UnknownProfile(AdaflowError):
    """Profile name not present in the merged network's table."""


# --- execution ---------------------------------------------------------------

class Deadlock(AdaflowError):
    """No fireable actor although tokens remain pending (validator bug)."""


class CapacityViolation(AdaflowError):
    """A firing would exceed a channel's token capacity."""


class UncalibratedKind(AdaflowError):
    """Cost model has no calibration entry for an actor kind."""


class EmptyDataset(AdaflowError):
    """Labeled dataset contains no samples."""


# --- runtime policies --------------------------------------------------------

class InfeasibleConstraint(AdaflowError):
    """No profile satisfies the policy's accuracy constraint."""


# --- emission ----------------------------------------------------------------

class UnemittableActor(AdaflowError):
    """Actor kind without a source template."""
