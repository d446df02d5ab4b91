Context6001 = new cop.Context({ name: "Context6001"})
BAContext6001 = Trait({
  option: function(){
    this.steerLeft();
    this.steerRight();
  }
})
Context6001.adapt(agent, BAContext6001)
