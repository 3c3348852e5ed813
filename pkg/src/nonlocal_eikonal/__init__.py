"""Semi-explicit upwind scheme for a periodic nonlocal eikonal equation."""
