# Quasistationary distribution module
