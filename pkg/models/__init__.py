# Operator models: pressure elimination, generator, spectra and time stepping
