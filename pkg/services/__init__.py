# services/__init__.py

# Import classes
from .sample_service import SampleService
from .latent_service import LatentService
from .fit_service import FitService
from .diagnose_service import DiagnoseService
from .kl_service import KlService
from .report_service import ReportService
from .automobile_service import AutomobileService

# Create instances
sample_service = SampleService()
latent_service = LatentService()
fit_service = FitService()
diagnose_service = DiagnoseService()
kl_service = KlService()
report_service = ReportService()
automobile_service = AutomobileService()

# Export instances
__all__ = [
    'sample_service',
    'latent_service',
    'fit_service',
    'diagnose_service',
    'kl_service',
    'report_service',
    'automobile_service',
]
