"""Almost contact deformation families on coordinate models, with numerical checks."""

from .charts import Chart, DifferentialForm, exterior_derivative, pullback
from .deformations import DeformationFamily
from .exterior import AlternatingFormValue, ContractError, wedge
from .models import collar, milnor_model, product_model, torus_binding
from .profiles import ProfileParams, build_profiles, make_default_profiles, validate_profiles
from .verify import CheckReport, SweepResult

__version__ = "0.1.0"
