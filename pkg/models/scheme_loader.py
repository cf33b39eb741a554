"""
Scheme loader factory for the time integrators.
"""
import logging

from models.backward_euler_scheme import BackwardEulerScheme
from models.base_scheme import TimeScheme
from models.generator import GeneratorBundle
from models.midpoint_scheme import MidpointScheme

logger = logging.getLogger(__name__)


class SchemeLoader:
    """Factory class for the time-stepping schemes."""

    SUPPORTED_SCHEMES = {
        "midpoint": MidpointScheme,
        "crank_nicolson": MidpointScheme,
        "backward_euler": BackwardEulerScheme,
    }

    @classmethod
    def get_supported_schemes(cls) -> list:
        """Return list of supported scheme names."""
        return list(cls.SUPPORTED_SCHEMES.keys())

    @classmethod
    def load_scheme(cls, scheme_name: str, bundle: GeneratorBundle, dt: float) -> TimeScheme:
        """
        Build and factorize a scheme by name.

        Args:
            scheme_name: Name of the scheme
            bundle: Generator bundle
            dt: Time step

        Returns:
            TimeScheme: Factorized scheme

        Raises:
            ValueError: If the scheme name is not supported
        """
        key = scheme_name.lower().replace("-", "_")
        if key not in cls.SUPPORTED_SCHEMES:
            raise ValueError(f"Unsupported scheme: {scheme_name}. Supported schemes: {cls.get_supported_schemes()}")
        scheme = cls.SUPPORTED_SCHEMES[key](bundle, dt)
        logger.info(f"Loaded scheme: {scheme.name} (dt={dt})")
        return scheme


def load_scheme(scheme_name: str, bundle: GeneratorBundle, dt: float) -> TimeScheme:
    """Convenience function to load a scheme."""
    return SchemeLoader.load_scheme(scheme_name, bundle, dt)
