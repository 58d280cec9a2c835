# Scripts package for the differentiable SAR renderer
