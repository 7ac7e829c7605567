from .binding import BindingData, ModelConstructionError, torus_binding, torus_reeb_field
from .collar import CollarModel, collar
from .milnor import MilnorModel, milnor_model
from .product import ProductModel, product_model
