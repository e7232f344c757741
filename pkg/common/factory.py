"""Factory for creating covariance estimators by inference method."""

from typing import Dict, List, Optional, Type

from common.base_covariance import BaseCovariance
from common.feqr_config import BandwidthRule, CiMethod, KernelSpec
from common.panel import PanelData


class CovarianceFactory:
    """
    Registry mapping each CiMethod to the estimator class implementing it.
    Concrete estimators register themselves when their module is imported.
    """

    _registry: Dict[CiMethod, Type[BaseCovariance]] = {}

    @classmethod
    def register(cls, estimators: Dict[CiMethod, Type[BaseCovariance]]) -> None:
        """
        Registers estimator classes.

        Args:
            estimators (Dict[CiMethod, Type[BaseCovariance]]):
                Keys are inference methods, values are BaseCovariance subclasses.
        """
        for method, estimator_class in estimators.items():
            if not isinstance(method, CiMethod):
                raise ValueError(f"Invalid key, must be an instance of CiMethod Enum: {method}")
            if not issubclass(estimator_class, BaseCovariance):
                raise ValueError(f"{estimator_class} is not a BaseCovariance subclass")
            cls._registry[method] = estimator_class

    @classmethod
    def create(
        cls,
        method: CiMethod,
        panel: PanelData,
        fit,
        spec: Optional[KernelSpec] = None,
        bandwidth_rule: BandwidthRule = BandwidthRule.SILVERMAN_N,
    ) -> BaseCovariance:
        """
        Create the estimator registered for a method.

        Args:
            method (CiMethod): Robust or standard.
            panel (PanelData): Data the fit was computed on.
            fit (FeqrFit): The fitted model.
            spec (KernelSpec): Fixed kernel; Silverman's rule when None.
            bandwidth_rule (BandwidthRule): Exponent used by Silverman's rule.

        Returns:
            BaseCovariance: Estimator ready for estimate().
        """
        if method not in cls._registry:
            available = [m.value for m in cls._registry]
            raise ValueError(
                f"No covariance estimator registered for '{method}'. Available methods: {available}"
            )
        return cls._registry[method](
            panel, fit, spec=spec, bandwidth_rule=bandwidth_rule
        )

    @classmethod
    def get_methods(cls) -> List[CiMethod]:
        """
        Return all registered inference methods.
        """
        return list(cls._registry.keys())
