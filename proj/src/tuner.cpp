namespace compdiff {}
