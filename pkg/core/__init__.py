import jax

# Jets and quadrature tolerances are double precision
jax.config.update("jax_enable_x64", True)
